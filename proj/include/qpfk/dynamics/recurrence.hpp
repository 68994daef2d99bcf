#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qpfk/dynamics/frequency.hpp"
#include "qpfk/dynamics/system.hpp"

namespace qpfk {

/// Largest denominator trusted in recurrence computations. The frequency
/// is held to 2^-64, so ||q omega|| carries an absolute error near q 2^-65
/// and stays accurate relative to its size 1/q only while q^2 << 2^65.
inline constexpr std::uint64_t kMaxTrustedDenominator = std::uint64_t{1} << 26;

/// Denominators 1 = q_0 <= q_1 < q_2 < ... up to kMaxTrustedDenominator.
inline std::vector<std::uint64_t> convergent_denominators(const Frequency& f) {
  std::vector<std::uint64_t> q{1};
  for (std::size_t n = 1; n <= f.representable(); ++n) {
    const auto qn = f.convergent(n).q;
    if (qn > kMaxTrustedDenominator) break;
    q.push_back(qn);
  }
  return q;
}

/// zeta(k) = min_{0 < |x| <= k} ||x omega|| for the circle rotation by omega.
/// By the best-approximation property this is ||q_n omega|| for the largest
/// denominator q_n <= k; the result is certified only while a further
/// convergent exists, so k must stay below the last cached denominator.
inline double zeta_rotation(const Frequency& f, std::uint64_t k) {
  if (k == 0) throw std::domain_error("zeta_rotation: k must be >= 1");
  const auto q = convergent_denominators(f);
  if (k >= q.back()) throw std::domain_error("zeta_rotation: k beyond the certified range of the prefix");
  const auto it = std::upper_bound(q.begin(), q.end(), k);
  return circle_norm(static_cast<Angle>(*std::prev(it)) * f.angle());
}

struct ZetaHatBounds {
  double lower = 0.0;
  double upper = 0.5;
};

/// Upper bound on zeta-hat(k) from interval covering: every interval longer
/// than 1/q_n is hit by theta + j omega for some 1 <= j <= q_n + q_{n-1}.
inline double zeta_hat_covering_bound(const Frequency& f, std::uint64_t k) {
  if (k == 0) throw std::domain_error("zeta_hat: k must be >= 1");
  const auto q = convergent_denominators(f);
  double upper = 0.5;
  for (std::size_t n = 1; n < q.size(); ++n)
    if (q[n] + q[n - 1] <= k) upper = std::min(upper, 1.0 / static_cast<double>(q[n]));
  return upper;
}

/// Certified bounds on zeta-hat(k) = sup_{theta, theta'} min_{0<|x|<=k} r(theta, T^x theta').
/// For a rotation the inner distance depends only on phi = theta' - theta,
/// so the lower bound scans phi = j / grid_n, j < grid_n.
inline ZetaHatBounds zeta_hat_rotation(const Frequency& f, std::uint64_t k, std::size_t grid_n = 256) {
  ZetaHatBounds b;
  b.upper = zeta_hat_covering_bound(f, k);
  const Angle w = f.angle();
  for (std::size_t j = 0; j < grid_n; ++j) {
    const Angle phi = angle_from_turns(static_cast<double>(j) / static_cast<double>(grid_n));
    double m = 0.5;
    for (std::uint64_t x = 1; x <= k; ++x) {
      m = std::min(m, circle_norm(phi + static_cast<Angle>(x) * w));
      m = std::min(m, circle_norm(phi - static_cast<Angle>(x) * w));
    }
    b.lower = std::max(b.lower, m);
  }
  b.lower = std::min(b.lower, b.upper);
  return b;
}

/// Values of zeta and bounds on zeta-hat for k = 1..k_max.
struct RecurrenceTable {
  enum class Method { cf_exact, brute_force };

  int k_max = 0;
  std::vector<double> zeta;
  std::vector<double> zeta_hat_lower;
  std::vector<double> zeta_hat_upper;
  std::vector<Method> method;

  double zeta_at(int k) const { return zeta.at(static_cast<std::size_t>(k - 1)); }

  void write_csv(std::ostream& os) const {
    os << "k,zeta,zeta_hat_lo,zeta_hat_hi,method\n";
    os.precision(17);
    for (int k = 1; k <= k_max; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      os << k << ',' << zeta[i] << ',' << zeta_hat_lower[i] << ',' << zeta_hat_upper[i] << ','
         << (method[i] == Method::cf_exact ? "cf_exact" : "brute_force") << '\n';
    }
  }
};

namespace detail {

// Calls fn(x) for every x with |x|_inf == k, one of each +-x pair.
template <class Fn>
void for_each_half_shell(int d, std::int64_t k, Fn&& fn) {
  Site x = Site::origin(d);
  const std::int64_t side = 2 * k + 1;
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t r = idx;
    for (int i = d - 1; i >= 0; --i) {
      x[i] = r % side - k;
      r /= side;
    }
    if (x.sup_norm() != k) continue;
    // keep x whose first nonzero coordinate is positive
    bool positive = false;
    for (int i = 0; i < d; ++i)
      if (x[i] != 0) {
        positive = x[i] > 0;
        break;
      }
    if (positive) fn(x);
  }
}

}  // namespace detail

/// Builds the recurrence table. Circle rotations use the continued-fraction
/// form for zeta and the covering bound for zeta-hat; other systems are
/// enumerated. grid_n is the per-coordinate resolution of the zeta-hat
/// lower-bound scan.
inline RecurrenceTable build_recurrence_table(const DynamicalSystem& sys, int k_max, std::size_t grid_n = 256) {
  if (k_max < 1) throw std::domain_error("build_recurrence_table: k_max must be >= 1");
  RecurrenceTable t;
  t.k_max = k_max;
  const auto n = static_cast<std::size_t>(k_max);
  t.zeta.resize(n);
  t.zeta_hat_lower.resize(n);
  t.zeta_hat_upper.assign(n, 0.5);
  t.method.assign(n, RecurrenceTable::Method::brute_force);

  if (sys.is_circle_rotation()) {
    const Frequency& f = *sys.frequency();
    const Angle w = f.angle();
    std::vector<double> best(grid_n, 0.5);
    for (int k = 1; k <= k_max; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      t.zeta[i] = zeta_rotation(f, static_cast<std::uint64_t>(k));
      t.zeta_hat_upper[i] = zeta_hat_covering_bound(f, static_cast<std::uint64_t>(k));
      t.method[i] = RecurrenceTable::Method::cf_exact;
      double lo = 0.0;
      for (std::size_t j = 0; j < grid_n; ++j) {
        const Angle phi = angle_from_turns(static_cast<double>(j) / static_cast<double>(grid_n));
        best[j] = std::min({best[j], circle_norm(phi + static_cast<Angle>(k) * w), circle_norm(phi - static_cast<Angle>(k) * w)});
        lo = std::max(lo, best[j]);
      }
      t.zeta_hat_lower[i] = std::min(lo, t.zeta_hat_upper[i]);
    }
    return t;
  }

  if (sys.kind() == DynamicalSystem::Kind::skew_shift) {
    // inf over theta of r(theta, T^x theta) is ||x alpha||: the second
    // coordinate x theta_1 + C(x,2) alpha vanishes for a suitable theta_1.
    const Angle alpha = sys.matrix(0, 0);
    double running = 0.5;
    // zeta-hat grid: theta' = (u, v) on the grid and theta = theta' - (p1, p2).
    const std::size_t g = std::max<std::size_t>(2, static_cast<std::size_t>(std::cbrt(static_cast<double>(grid_n) * grid_n)));
    std::vector<Angle> axis(g);
    for (std::size_t j = 0; j < g; ++j) axis[j] = angle_from_turns(static_cast<double>(j) / static_cast<double>(g));
    std::vector<double> best(g * g * g, 0.5);
    for (int k = 1; k <= k_max; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      running = std::min(running, circle_norm(static_cast<Angle>(k) * alpha));
      t.zeta[i] = running;
      double lo = 0.0;
      std::size_t idx = 0;
      for (std::size_t a = 0; a < g; ++a)
        for (std::size_t b = 0; b < g; ++b)
          for (std::size_t c = 0; c < g; ++c, ++idx) {
            const Phase theta_p = [&] { Phase p(2); p[0] = axis[a]; p[1] = axis[b]; return p; }();
            Phase theta = theta_p;
            theta[0] -= axis[b];
            theta[1] -= axis[c];
            for (std::int64_t x : {static_cast<std::int64_t>(k), -static_cast<std::int64_t>(k)})
              best[idx] = std::min(best[idx], torus_distance(theta, sys.orbit_point(theta_p, Site(x))));
            lo = std::max(lo, best[idx]);
          }
      t.zeta_hat_lower[i] = lo;
    }
    return t;
  }

  // General torus rotation: r(theta, theta + A x) does not depend on theta.
  const int nd = sys.phase_dim(), d = sys.lattice_dim();
  double running = 0.5;
  const std::size_t g = std::max<std::size_t>(2, static_cast<std::size_t>(std::pow(static_cast<double>(grid_n), 1.0 / nd)));
  std::size_t cells = 1;
  for (int i = 0; i < nd; ++i) cells *= g;
  std::vector<double> best(cells, 0.5);
  for (int k = 1; k <= k_max; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    std::vector<Phase> shifts;
    detail::for_each_half_shell(d, k, [&](const Site& x) {
      const Phase v = sys.orbit_point(sys.zero_phase(), x);
      double m = 0.0;
      for (int c = 0; c < nd; ++c) m = std::max(m, circle_norm(v[c]));
      running = std::min(running, m);
      shifts.push_back(v);
    });
    t.zeta[i] = running;
    double lo = 0.0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      Phase phi(nd);
      std::size_t r = cell;
      for (int c = 0; c < nd; ++c) {
        phi[c] = angle_from_turns(static_cast<double>(r % g) / static_cast<double>(g));
        r /= g;
      }
      for (const auto& v : shifts) {
        Phase plus = phi, minus = phi;
        for (int c = 0; c < nd; ++c) {
          plus[c] += v[c];
          minus[c] -= v[c];
        }
        best[cell] = std::min({best[cell], torus_distance(plus, sys.zero_phase()), torus_distance(minus, sys.zero_phase())});
      }
      lo = std::max(lo, best[cell]);
    }
    t.zeta_hat_lower[i] = lo;
  }
  return t;
}

/// The recurrence staircase k -> zeta(k), stored as maximal plateaus
/// [first, last] of equal value, and its continuous interpolation.
///
/// The interpolant passes through (1, zeta(1)) and through the right end
/// (last, value) of every later plateau, so ties at a plateau resolve to the
/// largest k and the inverse is continuous. Below the last tabulated value
/// both directions continue as s * zeta(s) = const (see `covers`).
class ZetaStaircase {
 public:
  struct Plateau {
    std::uint64_t first;
    std::uint64_t last;
    double value;
  };

  static ZetaStaircase from_frequency(const Frequency& f) {
    const auto q = convergent_denominators(f);
    std::vector<Plateau> p;
    for (std::size_t n = 0; n + 1 < q.size(); ++n) {
      if (q[n + 1] == q[n]) continue;  // q_0 = q_1 when a_1 = 1
      p.push_back({q[n], q[n + 1] - 1, circle_norm(static_cast<Angle>(q[n]) * f.angle())});
    }
    if (p.empty()) throw std::domain_error("ZetaStaircase: prefix too short");
    return ZetaStaircase(std::move(p));
  }

  static ZetaStaircase from_table(const RecurrenceTable& t) {
    std::vector<Plateau> p;
    for (int k = 1; k <= t.k_max; ++k) {
      const double v = t.zeta_at(k);
      if (!p.empty() && p.back().value == v)
        p.back().last = static_cast<std::uint64_t>(k);
      else
        p.push_back({static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(k), v});
    }
    return ZetaStaircase(std::move(p));
  }

  /// Exact staircase when a continued fraction is available, otherwise
  /// enumerated up to k_max (default 4096 for d = 1, 48 above).
  static ZetaStaircase for_system(const DynamicalSystem& sys, int k_max = 0) {
    if (sys.frequency()) return from_frequency(*sys.frequency());
    if (k_max <= 0) k_max = sys.lattice_dim() == 1 ? 4096 : 48;
    return from_table(build_recurrence_table(sys, k_max, 2));
  }

  const std::vector<Plateau>& plateaus() const { return plateaus_; }
  double zeta_one() const { return plateaus_.front().value; }
  std::uint64_t last_covered_k() const { return plateaus_.back().last; }
  double last_covered_value() const { return plateaus_.back().value; }
  bool covers(double r) const { return r >= plateaus_.back().value; }

  /// zeta(k) at an integer k within the tabulated range.
  double step(std::uint64_t k) const { return plateaus_[plateau_of(k)].value; }

  /// Index of the plateau containing k.
  std::size_t plateau_of(std::uint64_t k) const {
    if (k == 0 || k > plateaus_.back().last) throw std::out_of_range("ZetaStaircase: k outside tabulated range");
    const auto it = std::partition_point(plateaus_.begin(), plateaus_.end(), [k](const Plateau& p) { return p.last < k; });
    return static_cast<std::size_t>(it - plateaus_.begin());
  }

  /// The continuous, strictly decreasing interpolant at real s >= 1.
  double interp(double s) const {
    if (s < 1.0) throw std::domain_error("ZetaStaircase::interp: s must be >= 1");
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
      const auto& [s0, v0] = knots_[j];
      const auto& [s1, v1] = knots_[j + 1];
      if (s <= s1) return v0 + (s - s0) / (s1 - s0) * (v1 - v0);
    }
    const auto& [sl, vl] = knots_.back();
    return s <= sl ? vl : vl * sl / s;
  }

  /// Inverse of `interp`: the s >= 1 with interp(s) = r; 1 when r >= zeta(1).
  double inverse(double r) const {
    if (!(r > 0.0)) throw std::domain_error("ZetaStaircase::inverse: r must be positive");
    if (r >= knots_.front().second) return 1.0;
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
      const auto& [s0, v0] = knots_[j];
      const auto& [s1, v1] = knots_[j + 1];
      if (r >= v1) return s0 + (v0 - r) / (v0 - v1) * (s1 - s0);
    }
    const auto& [sl, vl] = knots_.back();
    return sl * vl / r;
  }

 private:
  explicit ZetaStaircase(std::vector<Plateau> p) : plateaus_(std::move(p)) {
    for (std::size_t j = 1; j < plateaus_.size(); ++j)
      if (!(plateaus_[j].value < plateaus_[j - 1].value))
        throw std::logic_error("ZetaStaircase: plateau values must strictly decrease");
    knots_.emplace_back(1.0, plateaus_.front().value);
    for (std::size_t j = 1; j < plateaus_.size(); ++j)
      knots_.emplace_back(static_cast<double>(plateaus_[j].last), plateaus_[j].value);
  }

  std::vector<Plateau> plateaus_;
  std::vector<std::pair<double, double>> knots_;
};

}  // namespace qpfk
