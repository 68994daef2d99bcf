#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qpfk {

/// A point of the circle R/Z in units of 2^-64 of a turn. Addition and
/// integer multiplication wrap modulo one turn exactly, so orbit
/// arithmetic is an exact group action.
using Angle = std::uint64_t;

inline constexpr double kTurnScale = 0x1p-64;

inline double to_turns(Angle a) { return static_cast<double>(a) * kTurnScale; }

/// Reduces x mod 1 and converts to fixed point.
inline Angle angle_from_turns(double x) {
  double f = x - std::floor(x);
  const long double scaled = static_cast<long double>(f) * 0x1p64L;
  if (scaled >= 0x1p64L) return 0;
  return static_cast<Angle>(scaled);
}

/// Distance to the nearest integer of (a - b), in turns, in [0, 1/2].
inline double circle_distance(Angle a, Angle b) {
  const Angle d = a - b;
  return to_turns(std::min(d, Angle{0} - d));
}

inline double circle_norm(Angle a) { return circle_distance(a, 0); }

inline constexpr int kMaxPhaseDim = 4;

/// A point of the torus T^n, n <= kMaxPhaseDim.
struct Phase {
  std::array<Angle, kMaxPhaseDim> c{};
  int dim = 1;

  Phase() = default;
  explicit Phase(int n) : dim(n) {
    if (n < 1 || n > kMaxPhaseDim) throw std::invalid_argument("Phase: bad dimension");
  }
  static Phase from_turns(std::initializer_list<double> xs) {
    Phase p(static_cast<int>(xs.size()));
    std::size_t i = 0;
    for (double x : xs) p.c[i++] = angle_from_turns(x);
    return p;
  }

  Angle operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  Angle& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

  friend bool operator==(const Phase& a, const Phase& b) { return a.dim == b.dim && a.c == b.c; }
};

/// Sup over coordinates of the circle distance.
inline double torus_distance(const Phase& a, const Phase& b) {
  if (a.dim != b.dim) throw std::invalid_argument("torus_distance: dimension mismatch");
  double m = 0.0;
  for (int i = 0; i < a.dim; ++i) m = std::max(m, circle_distance(a[i], b[i]));
  return m;
}

}  // namespace qpfk
