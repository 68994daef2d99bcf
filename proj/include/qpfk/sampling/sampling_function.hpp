#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/dynamics/phase.hpp"
#include "qpfk/dynamics/recurrence.hpp"

namespace qpfk {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// psi_F profile: log Z(r) = 1 - (zeta^{-1}(r))^xi below zeta(1), 0 above.
struct PsiFProfile {
  std::shared_ptr<const ZetaStaircase> staircase;
  double xi = 0.5;

  double log_value(double r) const {
    if (r <= 0.0) return kNegInf;
    if (r >= staircase->zeta_one()) return 0.0;
    return 1.0 - std::pow(staircase->inverse(r), xi);
  }
  double log_max() const { return 0.0; }
};

/// Z(r) = exp(-r^{-xi'}) for r <= r0, cosine ramp up to h_max on [r0, r1],
/// constant h_max beyond.
struct StretchedProfile {
  double xi_prime = 2.0;
  double r0 = 0.2;
  double r1 = 0.25;
  double h_max = 1.0;

  double log_value(double r) const {
    if (r <= 0.0) return kNegInf;
    if (r <= r0) return -std::pow(r, -xi_prime);
    if (r >= r1) return std::log(h_max);
    const double g0 = std::exp(-std::pow(r0, -xi_prime));
    const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * (r - r0) / (r1 - r0)));
    return std::log(g0 + (h_max - g0) * w);
  }
  double log_max() const { return std::log(h_max); }

  void validate() const {
    if (!(xi_prime > 0)) throw std::invalid_argument("stretched: xi must be positive");
    if (!(0 < r0 && r0 < r1 && r1 <= 0.5)) throw std::invalid_argument("stretched: need 0 < r0 < r1 <= 0.5");
    if (!(h_max > std::exp(-std::pow(r0, -xi_prime)))) throw std::invalid_argument("stretched: h_max below the ramp start");
  }
};

/// Tabulated profile: log|log h| interpolated linearly in log r between
/// knots, extrapolated with the first slope toward r = 0, constant beyond
/// the last knot.
struct TableProfile {
  std::vector<double> r;
  std::vector<double> h;

  double log_value(double x) const {
    if (x <= 0.0) return kNegInf;
    if (x >= r.back()) return std::log(h.back());
    auto lll = [&](std::size_t i) { return std::log(-std::log(h[i])); };
    std::size_t i = 0;
    if (x > r.front()) {
      while (r[i + 1] < x) ++i;
    }
    const double t = (std::log(x) - std::log(r[i])) / (std::log(r[i + 1]) - std::log(r[i]));
    return -std::exp(lll(i) + t * (lll(i + 1) - lll(i)));
  }
  double log_max() const { return std::log(h.back()); }

  void validate() const {
    if (r.size() < 2 || r.size() != h.size()) throw std::invalid_argument("custom_table: need >= 2 matching (r, h) knots");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!(r[i] > 0 && r[i] <= 0.5)) throw std::invalid_argument("custom_table: r must lie in (0, 0.5]");
      if (!(h[i] > 0 && h[i] < 1)) throw std::invalid_argument("custom_table: h must lie in (0, 1)");
      if (i && !(r[i] > r[i - 1] && h[i] > h[i - 1]))
        throw std::invalid_argument("custom_table: r and h must increase strictly");
    }
  }
};

/// The factor 1/v(r(theta, theta0)) of h_eps. The exponent of v is the
/// piecewise-linear L(x) raised to the power a, with L(eta) = 0,
/// L(eta_i) = L_i and L(x) = L_last eta_last / x below the last radius.
struct Deepening {
  Phase theta0;
  double a = 2.0;
  double eta = 0.1;
  std::vector<double> etas;
  std::vector<double> lengths;

  double length_at(double x) const {
    if (x > eta) return 0.0;
    if (x > etas.front()) return (eta - x) / (eta - etas.front()) * lengths.front();
    for (std::size_t i = 0; i + 1 < etas.size(); ++i)
      if (x > etas[i + 1])
        return ((x - etas[i + 1]) * lengths[i] + (etas[i] - x) * lengths[i + 1]) / (etas[i] - etas[i + 1]);
    if (x <= 0.0) return std::numeric_limits<double>::infinity();
    return lengths.back() * etas.back() / x;
  }

  double log_v(double x) const { return std::pow(length_at(x), a); }

  void validate() const {
    if (!(a > 1.0)) throw std::invalid_argument("h_eps: a must exceed 1");
    if (etas.empty() || etas.size() != lengths.size()) throw std::invalid_argument("h_eps: need matching eta and L sequences");
    double prev = eta;
    for (double e : etas) {
      if (!(e > 0 && e < prev)) throw std::invalid_argument("h_eps: eta sequence must decrease strictly from eta");
      prev = e;
    }
    for (std::size_t i = 0; i < lengths.size(); ++i)
      if (!(lengths[i] >= 1) || (i && lengths[i] < lengths[i - 1]))
        throw std::invalid_argument("h_eps: covering lengths must be >= 1 and non-decreasing");
  }
};

/// A sampling function h = c * Z(r(theta, F)) / prod v_j(r(theta, theta_j)).
/// Immutable; evaluation is pure. All values are available in log form,
/// eval(theta) returns exactly 0 on F.
class SamplingFunction {
 public:
  using Profile = std::variant<PsiFProfile, StretchedProfile, TableProfile>;

  SamplingFunction(std::vector<Phase> zeros, Profile profile, double log_scale = 0.0)
      : zeros_(std::move(zeros)), profile_(std::move(profile)), log_scale_(log_scale) {
    if (zeros_.empty()) throw std::invalid_argument("SamplingFunction: zero set must be nonempty");
    for (const auto& z : zeros_)
      if (z.dim != zeros_.front().dim) throw std::invalid_argument("SamplingFunction: zeros of mixed dimension");
    std::visit([](const auto& p) {
      if constexpr (requires { p.validate(); }) p.validate();
    }, profile_);
  }

  const std::vector<Phase>& zeros() const { return zeros_; }
  const Profile& profile() const { return profile_; }
  const std::vector<Deepening>& deepenings() const { return deepenings_; }
  double log_scale() const { return log_scale_; }
  int phase_dim() const { return zeros_.front().dim; }

  double distance_to_zeros(const Phase& theta) const {
    double m = 1.0;
    for (const auto& z : zeros_) m = std::min(m, torus_distance(theta, z));
    return m;
  }

  double log_eval(const Phase& theta) const {
    double v = log_scale_ + base_log(distance_to_zeros(theta));
    for (const auto& dp : deepenings_) v -= dp.log_v(torus_distance(theta, dp.theta0));
    return std::isnan(v) ? kNegInf : v;
  }

  double eval(const Phase& theta) const { return std::exp(log_eval(theta)); }

  /// log h along a radial profile: every factor evaluated at distance r.
  /// Since the base profile increases in r and v decreases, exp of
  /// log_radial(r(theta, F)) is a lower bound for h(theta).
  double log_radial(double r) const {
    double v = log_scale_ + base_log(r);
    for (const auto& dp : deepenings_) v -= dp.log_v(r);
    return std::isnan(v) ? kNegInf : v;
  }

  double log_sup_norm() const {
    return log_scale_ + std::visit([](const auto& p) { return p.log_max(); }, profile_);
  }
  double sup_norm() const { return std::exp(log_sup_norm()); }

  SamplingFunction scaled(double c) const {
    if (!(c > 0)) throw std::invalid_argument("SamplingFunction::scaled: factor must be positive");
    auto out = *this;
    out.log_scale_ += std::log(c);
    return out;
  }

  /// tau(h) = h / ||h||_inf.
  SamplingFunction normalized() const {
    auto out = *this;
    out.log_scale_ = -std::visit([](const auto& p) { return p.log_max(); }, profile_);
    return out;
  }

  SamplingFunction with_deepening(Deepening d) const {
    d.validate();
    if (d.theta0.dim != phase_dim()) throw std::invalid_argument("h_eps: theta0 dimension mismatch");
    auto out = *this;
    out.deepenings_.push_back(std::move(d));
    return out;
  }

  std::string kind() const {
    if (!deepenings_.empty()) return "h_eps";
    switch (profile_.index()) {
      case 0: return "psi_F";
      case 1: return "stretched";
      default: return "custom_table";
    }
  }

 private:
  double base_log(double r) const {
    return std::visit([r](const auto& p) { return p.log_value(r); }, profile_);
  }

  std::vector<Phase> zeros_;
  Profile profile_;
  double log_scale_ = 0.0;
  std::vector<Deepening> deepenings_;
};

/// psi_F for the recurrence staircase of a system. Requires 0 < xi < 1/d.
inline SamplingFunction make_psi_F(std::vector<Phase> zeros, double xi, const ZetaStaircase& staircase, int lattice_dim) {
  if (!(xi > 0)) throw std::invalid_argument("make_psi_F: xi must be positive");
  if (!(xi < 1.0 / lattice_dim)) throw std::invalid_argument("make_psi_F: constraint xi < 1/d violated");
  return SamplingFunction(std::move(zeros), PsiFProfile{std::make_shared<const ZetaStaircase>(staircase), xi});
}

inline SamplingFunction make_psi_F(std::vector<Phase> zeros, double xi, const DynamicalSystem& sys) {
  return make_psi_F(std::move(zeros), xi, ZetaStaircase::for_system(sys), sys.lattice_dim());
}

inline SamplingFunction make_stretched(std::vector<Phase> zeros, double xi_prime, double h_max = 1.0,
                                       double r0 = 0.2, double r1 = 0.25) {
  return SamplingFunction(std::move(zeros), StretchedProfile{xi_prime, r0, r1, h_max});
}

}  // namespace qpfk
