#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qpfk/core/lattice.hpp"
#include "qpfk/dynamics/frequency.hpp"
#include "qpfk/dynamics/recurrence.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/sampling/sampling_function.hpp"

namespace qpfk {

/// Psi = Z o zeta for the admitted profile Z(r) = h_radial(r / 2). With the
/// halved radius, two visits of an orbit to one ball B_{Z^{-1}(eps)}(theta_i)
/// at separation n force zeta(n) < 2 Z_h^{-1}(eps), i.e. Psi(n) < eps.
class TransversalityProfile {
 public:
  TransversalityProfile(SamplingFunction h, ZetaStaircase staircase, double xi_target = 0.0)
      : h_(std::move(h)), stair_(std::move(staircase)), xi_(xi_target) {}

  double xi_target() const { return xi_; }
  const ZetaStaircase& staircase() const { return stair_; }

  double log_Z(double r) const { return h_.log_radial(0.5 * r); }
  double log_psi(std::uint64_t k) const { return log_Z(stair_.step(k)); }

  /// Largest integer k with Psi(k) >= eps (0 if none). Throws when the
  /// answer lies beyond the tabulated staircase.
  std::uint64_t psi_inverse(double log_eps) const {
    std::uint64_t k = 0;
    for (const auto& p : stair_.plateaus()) {
      if (log_Z(p.value) < log_eps) return k;
      k = p.last;
    }
    throw std::out_of_range("psi_inverse: eps below the tabulated recurrence range");
  }

  /// The Kac-type bound |F| / Psi^{-1}(eps) on mu{h < eps}; +inf when Psi^{-1} = 0.
  double kac_bound(double log_eps) const {
    const auto k = psi_inverse(log_eps);
    if (k == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(h_.zeros().size()) / static_cast<double>(k);
  }

 private:
  SamplingFunction h_;
  ZetaStaircase stair_;
  double xi_;
};

/// Sites x of the region (lexicographic order) with h(T^x theta) < eps,
/// compared in log form.
inline std::vector<Site> resonant_sites(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta,
                                        const Region& box, double log_eps) {
  std::vector<Site> out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Site x = box.site(i);
    if (h.log_eval(sys.orbit_point(theta, x)) < log_eps) out.push_back(x);
  }
  return out;
}

/// Empirical liminf proxy of log|log h| / |log r| along theta0 + r e_1,
/// minimised over the grid of radii.
inline double transversality_exponent(const SamplingFunction& h, const Phase& theta0, const std::vector<double>& r_grid) {
  if (r_grid.empty()) throw std::invalid_argument("transversality_exponent: empty radius grid");
  double best = std::numeric_limits<double>::infinity();
  for (double r : r_grid) {
    if (!(r > 0 && r < 1)) throw std::invalid_argument("transversality_exponent: radii must lie in (0, 1)");
    Phase th = theta0;
    th[0] += angle_from_turns(r);
    const double lh = h.log_eval(th);
    if (!std::isfinite(lh) || lh >= 0.0)
      throw std::domain_error("transversality_exponent: log h not finite and negative at r = " + std::to_string(r));
    best = std::min(best, std::log(-lh) / std::abs(std::log(r)));
  }
  return best;
}

enum class Regime { order_all_frequencies, localized_finite_type, localized_stretched, unclassified };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::order_all_frequencies: return "order_all_frequencies";
    case Regime::localized_finite_type: return "localized_finite_type";
    case Regime::localized_stretched: return "localized_stretched";
    default: return "unclassified";
  }
}

/// Places a transversality exponent in the circle-rotation regimes.
/// Exponents within `tol` of the critical value 1 are left unclassified.
inline Regime classify_regime(double exponent, const FrequencyClass& fc, double tol = 1e-3) {
  if (exponent > 1.0 + tol) return Regime::order_all_frequencies;
  if (exponent < 1.0 - tol && fc.kind == FrequencyClass::Kind::finite_type) return Regime::localized_finite_type;
  if (fc.kind == FrequencyClass::Kind::stretched && fc.b_hat > 0 && exponent < 1.0 / fc.b_hat)
    return Regime::localized_stretched;
  return Regime::unclassified;
}

/// Covering radius of the orbit segment {T^x theta0 : x in [0, L-1]^d}.
/// Exact for circle rotations; for other systems a grid estimate with
/// `grid` points per phase axis, inflated by half the grid spacing.
inline double covering_radius(const DynamicalSystem& sys, const Phase& theta0, std::uint64_t L, std::size_t grid = 64) {
  const int d = sys.lattice_dim();
  std::vector<Phase> pts;
  Region box(Site::origin(d), [&] { Site s = Site::origin(d); for (int i = 0; i < d; ++i) s[i] = static_cast<std::int64_t>(L) - 1; return s; }());
  for (std::size_t i = 0; i < box.size(); ++i) pts.push_back(sys.orbit_point(theta0, box.site(i)));
  if (sys.phase_dim() == 1) {
    std::vector<Angle> a;
    for (const auto& p : pts) a.push_back(p[0]);
    std::sort(a.begin(), a.end());
    Angle gap = a.front() - a.back();  // wrap-around gap, modulo one turn
    for (std::size_t i = 1; i < a.size(); ++i) gap = std::max(gap, a[i] - a[i - 1]);
    if (a.size() == 1) return 0.5;
    return 0.5 * to_turns(gap);
  }
  const int n = sys.phase_dim();
  std::size_t cells = 1;
  for (int i = 0; i < n; ++i) cells *= grid;
  double worst = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    Phase g(n);
    std::size_t r = c;
    for (int i = 0; i < n; ++i) {
      g[i] = angle_from_turns(static_cast<double>(r % grid) / static_cast<double>(grid));
      r /= grid;
    }
    double m = 0.5;
    for (const auto& p : pts) m = std::min(m, torus_distance(g, p));
    worst = std::max(worst, m);
  }
  return std::min(0.5, worst + 0.5 / static_cast<double>(grid));
}

/// Smallest L with covering radius below eta, by doubling then bisection.
inline std::uint64_t covering_length(const DynamicalSystem& sys, const Phase& theta0, double eta,
                                     std::uint64_t L_max = std::uint64_t{1} << 22) {
  if (!(eta > 0)) throw std::invalid_argument("covering_length: eta must be positive");
  std::uint64_t hi = 1;
  while (covering_radius(sys, theta0, hi) >= eta) {
    if (hi >= L_max) throw std::runtime_error("covering_length: no covering length below the search cap");
    hi = std::min(L_max, hi * 2);
  }
  std::uint64_t lo = hi / 2;  // fails (or 0)
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (covering_radius(sys, theta0, mid) < eta ? hi : lo) = mid;
  }
  return hi;
}

/// A radius eta with h(theta) < eps whenever r(theta, theta0) < eta:
/// 0.9 times the largest r on a bisection with h_radial(r) < eps.
inline double eta_for_tolerance(const SamplingFunction& h, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("eta_for_tolerance: eps must be positive");
  const double le = std::log(eps);
  if (h.log_radial(0.5) < le) return 0.45;
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h.log_radial(mid) < le ? lo : hi) = mid;
  }
  if (!(lo > 0)) throw std::domain_error("eta_for_tolerance: no radius found");
  return 0.9 * lo;
}

/// h_eps from explicit radii and covering lengths.
inline SamplingFunction make_h_eps(const SamplingFunction& h, const Phase& theta0, double a, double eta,
                                   std::vector<double> etas, std::vector<double> lengths) {
  bool is_zero = false;
  for (const auto& z : h.zeros()) is_zero |= z == theta0;
  if (!is_zero) throw std::invalid_argument("make_h_eps: theta0 must be a zero of h");
  return h.with_deepening(Deepening{theta0, a, eta, std::move(etas), std::move(lengths)});
}

/// Record of the automatic h_eps construction.
struct HEpsMetadata {
  double eta = 0.0;
  std::vector<double> etas;
  std::vector<double> lengths;
};

/// h_eps with eta chosen from the tolerance, eta_i = eta ratio^{i+1}, and
/// L_i the covering length of eta_i found by search.
inline SamplingFunction make_h_eps(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta0,
                                   double eps, double a, std::size_t levels = 6, double ratio = 0.5,
                                   HEpsMetadata* meta = nullptr) {
  if (levels == 0) throw std::invalid_argument("make_h_eps: need at least one level");
  if (!(ratio > 0 && ratio < 1)) throw std::invalid_argument("make_h_eps: ratio must lie in (0, 1)");
  HEpsMetadata m;
  m.eta = eta_for_tolerance(h, eps);
  double e = m.eta;
  for (std::size_t i = 0; i < levels; ++i) {
    e *= ratio;
    m.etas.push_back(e);
    m.lengths.push_back(static_cast<double>(covering_length(sys, theta0, e)));
  }
  for (std::size_t i = 1; i < m.lengths.size(); ++i) m.lengths[i] = std::max(m.lengths[i], m.lengths[i - 1]);
  auto out = make_h_eps(h, theta0, a, m.eta, m.etas, m.lengths);
  if (meta) *meta = std::move(m);
  return out;
}

}  // namespace qpfk
