#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qpfk {

/// The multiscale exponent chain for lattice dimension d.
struct MsaExponents {
  int d = 1;
  double xi = 0, nu = 0, alpha = 0, gamma = 0, kappa = 0, tau = 0;

  nlohmann::json to_json() const {
    return {{"d", d}, {"xi", xi}, {"nu", nu}, {"alpha", alpha}, {"gamma", gamma}, {"kappa", kappa}, {"tau", tau}};
  }
};

class InfeasibleExponents : public std::invalid_argument {
 public:
  InfeasibleExponents(std::string constraint)
      : std::invalid_argument("infeasible exponents: constraint " + constraint + " violated"), constraint_(std::move(constraint)) {}
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

/// Checks every inequality of the chain with the given slack and returns
/// the name of the first violated one.
inline std::optional<std::string> verify_exponents(const MsaExponents& e, double slack = 1e-9) {
  const double d = e.d;
  struct Check {
    const char* name;
    double lhs, rhs;  // requires lhs + slack <= rhs
  };
  if (e.d < 1) return "d >= 1";
  const double D = e.nu * (d + 1) - (1 + e.xi) * d;
  const std::vector<Check> checks = {
      {"xi > 0", 0.0, e.xi},
      {"xi < 1/d", e.xi, 1.0 / d},
      {"nu > (1+xi)/(1+1/d)", (1 + e.xi) / (1 + 1.0 / d), e.nu},
      {"nu < 1", e.nu, 1.0},
      {"alpha > d", d, e.alpha},
      {"alpha > (xi+nu)d/(nu(d+1)-(1+xi)d)", D > 0 ? (e.xi + e.nu) * d / D : INFINITY, e.alpha},
      {"kappa > nu+alpha-alpha*nu", e.nu + e.alpha - e.alpha * e.nu, e.kappa},
      {"kappa < alpha*nu/d-xi(alpha+1)", e.kappa, e.alpha * e.nu / d - e.xi * (e.alpha + 1)},
      {"gamma > xi(alpha+1)d", e.xi * (e.alpha + 1) * d, e.gamma},
      {"gamma < alpha*nu-kappa*d", e.gamma, e.alpha * e.nu - e.kappa * d},
      {"tau > nu", e.nu, e.tau},
      {"tau < kappa-alpha(1-nu)", e.tau, e.kappa - e.alpha * (1 - e.nu)},
  };
  for (const auto& c : checks)
    if (!(c.lhs + slack <= c.rhs)) return std::string(c.name);
  return std::nullopt;
}

/// Exponents at interval midpoints: alpha = max(d + 1/2, A + d/(5D)) with A
/// the alpha lower bound and D = nu(d+1) - (1+xi)d, then kappa, gamma and
/// tau at the midpoints of their intervals.
inline MsaExponents feasible_exponents(int d, double xi, double nu) {
  if (d < 1) throw InfeasibleExponents("d >= 1");
  if (!(xi > 0)) throw InfeasibleExponents("xi > 0");
  if (!(xi < 1.0 / d)) throw InfeasibleExponents("xi < 1/d");
  if (!(nu > (1 + xi) / (1 + 1.0 / d))) throw InfeasibleExponents("nu > (1+xi)/(1+1/d)");
  if (!(nu < 1)) throw InfeasibleExponents("nu < 1");
  MsaExponents e;
  e.d = d;
  e.xi = xi;
  e.nu = nu;
  const double D = nu * (d + 1) - (1 + xi) * d;
  const double a_star = (xi + nu) * d / D;
  e.alpha = std::max(d + 0.5, a_star + 0.2 * d / D);
  e.kappa = 0.5 * ((nu + e.alpha - e.alpha * nu) + (e.alpha * nu / d - xi * (e.alpha + 1)));
  e.gamma = 0.5 * (xi * (e.alpha + 1) * d + (e.alpha * nu - e.kappa * d));
  e.tau = 0.5 * (nu + (e.kappa - e.alpha * (1 - nu)));
  if (auto bad = verify_exponents(e)) throw InfeasibleExponents(*bad);
  return e;
}

enum class MassDecrement { tau, kappa };

/// Scales L_k, thresholds log eps_k = -L_k^gamma, masses m_{k+1} = m_k - L_k^{-tau}
/// (or L_k^{-kappa}) and log heights L_k^nu.
struct MsaSchedule {
  std::vector<std::int64_t> L;
  std::vector<double> eps_log;
  std::vector<double> m;
  std::vector<double> T_log;
  double m_inf = 0;

  nlohmann::json to_json() const {
    return {{"L", L}, {"eps_log", eps_log}, {"m", m}, {"T_log", T_log}, {"m_inf", m_inf}};
  }
};

/// k_max + 1 scales from L_0. m_inf sums the decrements until they fall
/// below 1e-16 or the scale overflows.
inline MsaSchedule make_schedule(const MsaExponents& e, std::int64_t L0, double m0, int k_max,
                                 MassDecrement dec = MassDecrement::tau) {
  if (L0 < 2) throw std::invalid_argument("make_schedule: L0 must be >= 2");
  if (!(m0 > 0)) throw std::invalid_argument("make_schedule: m0 must be positive");
  const double p = dec == MassDecrement::tau ? e.tau : e.kappa;
  MsaSchedule s;
  double L = static_cast<double>(L0), m = m0;
  for (int k = 0; k <= k_max; ++k) {
    if (L > 9.0e15) throw std::overflow_error("make_schedule: scale L_" + std::to_string(k) + " overflows");
    s.L.push_back(static_cast<std::int64_t>(L));
    s.eps_log.push_back(-std::pow(L, e.gamma));
    s.T_log.push_back(std::pow(L, e.nu));
    s.m.push_back(m);
    m -= std::pow(L, -p);
    L = std::round(std::pow(L, e.alpha));
  }
  double tail = s.m.back() - std::pow(static_cast<double>(s.L.back()), -p);
  for (double l = static_cast<double>(s.L.back()); std::isfinite(l);) {
    l = std::pow(l, e.alpha);
    const double dm = std::pow(l, -p);
    if (dm < 1e-16) break;
    tail -= dm;
  }
  s.m_inf = tail;
  return s;
}

}  // namespace qpfk
