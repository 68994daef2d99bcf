#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpfk/core/lattice.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/dynamics/frequency.hpp"
#include "qpfk/dynamics/phase.hpp"

namespace qpfk {

/// A Z^d action on a torus: either a rotation theta -> theta + A x (A an
/// n-by-d matrix of frequencies) or the skew shift
/// (theta_1, theta_2) -> (theta_1 + alpha, theta_1 + theta_2) on T^2.
/// All arithmetic is exact modulo one turn (see Angle).
class DynamicalSystem {
 public:
  enum class Kind { torus_rotation, skew_shift };

  /// One-dimensional rotation by a continued-fraction frequency.
  static DynamicalSystem rotation(Frequency f) {
    DynamicalSystem s(Kind::torus_rotation, 1, 1);
    s.matrix_ = {f.angle()};
    s.freq_ = std::move(f);
    s.check_aperiodic();
    return s;
  }

  /// Rotation of T^n by an n-by-d matrix, row-major, entries in turns.
  static DynamicalSystem torus_rotation(int n, int d, const std::vector<double>& matrix_turns) {
    if (matrix_turns.size() != static_cast<std::size_t>(n * d))
      throw std::invalid_argument("torus_rotation: matrix must have n*d entries");
    DynamicalSystem s(Kind::torus_rotation, n, d);
    for (double x : matrix_turns) s.matrix_.push_back(angle_from_turns(x));
    s.check_aperiodic();
    return s;
  }

  static DynamicalSystem skew_shift(Frequency alpha) {
    DynamicalSystem s(Kind::skew_shift, 2, 1);
    s.matrix_ = {alpha.angle()};
    s.freq_ = std::move(alpha);
    s.check_aperiodic();
    return s;
  }

  Kind kind() const { return kind_; }
  int phase_dim() const { return n_; }
  int lattice_dim() const { return d_; }

  /// The continued-fraction frequency, for 1-d rotations and skew shifts.
  const Frequency* frequency() const { return freq_ ? &*freq_ : nullptr; }

  /// True when the recurrence function has the closed continued-fraction form.
  bool is_circle_rotation() const { return kind_ == Kind::torus_rotation && n_ == 1 && d_ == 1 && freq_; }

  Angle matrix(int i, int j) const { return matrix_[static_cast<std::size_t>(i * d_ + j)]; }

  Phase orbit_point(const Phase& theta, const Site& x) const {
    if (theta.dim != n_) throw std::invalid_argument("orbit_point: phase dimension mismatch");
    if (x.dim != d_) throw std::invalid_argument("orbit_point: lattice dimension mismatch");
    Phase out = theta;
    if (kind_ == Kind::torus_rotation) {
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < d_; ++j) out[i] += matrix(i, j) * static_cast<Angle>(x[j]);
      return out;
    }
    // T^x (t1, t2) = (t1 + x a, t2 + x t1 + C(x, 2) a), valid for all integer x.
    const std::int64_t k = x[0];
    const Angle alpha = matrix_[0];
    const auto pairs = static_cast<Angle>(static_cast<__int128>(k) * (k - 1) / 2);
    out[0] = theta[0] + static_cast<Angle>(k) * alpha;
    out[1] = theta[1] + static_cast<Angle>(k) * theta[0] + pairs * alpha;
    return out;
  }

  double distance(const Phase& a, const Phase& b) const { return torus_distance(a, b); }

  /// A Haar-uniform phase.
  Phase sample_phase(Rng& rng) const {
    Phase p(n_);
    for (int i = 0; i < n_; ++i) p[i] = rng();
    return p;
  }

  Phase zero_phase() const { return Phase(n_); }

  std::string describe() const {
    if (kind_ == Kind::skew_shift) return "skew_shift";
    return "torus_rotation(" + std::to_string(n_) + "x" + std::to_string(d_) + ")";
  }

 private:
  DynamicalSystem(Kind k, int n, int d) : kind_(k), n_(n), d_(d) {
    if (n < 1 || n > kMaxPhaseDim) throw std::invalid_argument("DynamicalSystem: phase dimension out of range");
    if (d < 1 || d > kMaxLatticeDim) throw std::invalid_argument("DynamicalSystem: lattice dimension out of range");
  }

  void check_aperiodic() const {
    // Every generator must move some coordinate, otherwise T^{e_j} = id.
    for (int j = 0; j < d_; ++j) {
      bool moves = false;
      for (int i = 0; i < (kind_ == Kind::skew_shift ? 1 : n_); ++i) moves |= matrix(i, j) != 0;
      if (!moves) throw std::invalid_argument("DynamicalSystem: generator acts trivially (periodic action)");
    }
  }

  Kind kind_;
  int n_;
  int d_;
  std::vector<Angle> matrix_;
  std::optional<Frequency> freq_;
};

}  // namespace qpfk
