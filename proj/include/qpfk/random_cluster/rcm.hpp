#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/core/parallel.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/core/stats.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/percolation/estimate.hpp"
#include "qpfk/random_cluster/chain.hpp"
#include "qpfk/sampling/sampling_function.hpp"

namespace qpfk {

struct McParams {
  std::uint64_t n_sweeps = 20000;  // recorded sweeps per chain
  std::uint64_t burn_in = 10000;   // sweeps
  std::uint64_t thinning = 1;      // sweeps between recorded samples
  std::uint32_t n_chains = 4;
  double rhat_threshold = 1.05;
};

/// An MCMC estimate with its convergence diagnostics. The interval uses
/// the pooled effective sample size in place of the sample count.
struct RcmResult {
  EstimateCI estimate;
  double rhat = 1.0;
  double ess = 0.0;
  double acceptance_rate = 0.0;
  bool converged = true;

  nlohmann::json diagnostics() const {
    return {{"estimate", estimate.estimate}, {"ci_lo", estimate.ci_lo}, {"ci_hi", estimate.ci_hi}, {"rhat", rhat},
            {"ess", ess}, {"acceptance_rate", acceptance_rate}, {"converged", converged}};
  }
};

namespace detail {

/// Runs independent chains and records f(config) every `thinning` sweeps.
template <class F>
std::vector<std::vector<double>> run_chains(const Environment& env, const SpaceTimeBox& box, const McParams& mc,
                                            std::uint64_t seed, unsigned workers, F&& f, std::vector<double>* acceptance = nullptr) {
  if (mc.n_chains < 1 || mc.n_sweeps < 1 || mc.thinning < 1) throw std::invalid_argument("McParams: chains, sweeps and thinning must be >= 1");
  std::vector<std::vector<double>> out(mc.n_chains);
  std::vector<double> acc(mc.n_chains);
  parallel_for(mc.n_chains, workers, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    RcmChain chain(env, sample_configuration(env, box, rng));
    for (std::uint64_t s = 0; s < mc.burn_in; ++s) chain.sweep(rng);
    out[c].reserve(mc.n_sweeps);
    for (std::uint64_t s = 0; s < mc.n_sweeps; ++s) {
      for (std::uint64_t t = 0; t < mc.thinning; ++t) chain.sweep(rng);
      out[c].push_back(f(chain.config()));
    }
    chain.verify();
    acc[c] = chain.stats().acceptance_rate();
  });
  if (acceptance) *acceptance = std::move(acc);
  return out;
}

inline RcmResult summarize(const std::vector<std::vector<double>>& chains, const McParams& mc, std::uint64_t seed,
                           const std::vector<double>& acceptance) {
  RcmResult r;
  double hits = 0, n = 0;
  for (const auto& c : chains) {
    for (double v : c) hits += v;
    n += static_cast<double>(c.size());
    r.ess += effective_sample_size(c);
  }
  r.estimate = EstimateCI::from_counts(static_cast<std::uint64_t>(hits), static_cast<std::uint64_t>(n), seed);
  r.estimate.n_effective = r.ess;
  const auto w = wilson_interval(r.estimate.estimate * r.ess, r.ess);
  r.estimate.ci_lo = std::min(w.lo, r.estimate.estimate);
  r.estimate.ci_hi = std::max(w.hi, r.estimate.estimate);
  r.rhat = chains.size() >= 2 ? split_rhat(chains) : 1.0;
  if (std::isnan(r.rhat)) r.rhat = 1.0;
  r.converged = r.rhat < mc.rhat_threshold;
  for (double a : acceptance) r.acceptance_rate += a / static_cast<double>(acceptance.size());
  return r;
}

}  // namespace detail

/// MCMC estimate of Q^(q)(event) on the box.
inline RcmResult rcm_estimate(const Environment& env, const SpaceTimeBox& box, const Event& ev, const McParams& mc,
                              std::uint64_t seed, unsigned workers = 1) {
  std::vector<double> acc;
  const auto chains = detail::run_chains(env, box, mc, seed, workers,
                                         [&](const Configuration& c) { return event_holds(build_clusters(c), ev) ? 1.0 : 0.0; }, &acc);
  return detail::summarize(chains, mc, seed, acc);
}

/// Event probability under Q^(q): direct sampling at q = 1, MCMC otherwise.
inline RcmResult estimate_q(const Environment& env, const SpaceTimeBox& box, const Event& ev, const McParams& mc,
                            std::uint64_t seed, unsigned workers = 1) {
  if (env.q == 1.0) {
    RcmResult r;
    r.estimate = estimate_event(env, box, ev, mc.n_sweeps * mc.n_chains, seed, workers);
    r.ess = static_cast<double>(r.estimate.trials);
    r.acceptance_rate = 1.0;
    return r;
  }
  return rcm_estimate(env, box, ev, mc, seed, workers);
}

/// Box n of the magnetization proxy: Lambda_{L_n}(0) x [-T_n, T_n].
struct ProxyBox {
  std::int64_t L;
  double T;
};

/// Estimates of Q^(q)((0,0) <-> boundary of B_n) for the environment
/// delta(x) = h(T^x theta).
inline std::vector<RcmResult> magnetization_proxy(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta,
                                                  double q, double lambda, const std::vector<ProxyBox>& boxes,
                                                  const McParams& mc, std::uint64_t seed, unsigned workers = 1) {
  std::vector<RcmResult> out;
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    if (n && boxes[n].L < boxes[n - 1].L) throw std::invalid_argument("magnetization_proxy: boxes must increase");
    const auto origin = Site::origin(sys.lattice_dim());
    const auto box = SpaceTimeBox::cylinder(origin, boxes[n].L, boxes[n].T);
    const auto env = Environment::from_sampling(h, sys, theta, box.region, lambda, q);
    out.push_back(estimate_q(env, box, Event::escape(origin), mc, derive_seed(seed, n), workers));
  }
  return out;
}

struct FkgReport {
  double p_u = 0, p_v = 0, p_uv = 0;
  double covariance = 0;
  double sigma = 0;
  bool violation = false;  // covariance < -3 sigma
};

/// Estimates Cov(1_U, 1_V) with its standard error; q = 1 by direct
/// sampling, q > 1 by MCMC with ESS-corrected error.
inline FkgReport fkg_check(const Environment& env, const SpaceTimeBox& box, const Event& u, const Event& v, const McParams& mc,
                           std::uint64_t seed, unsigned workers = 1) {
  std::vector<std::vector<double>> us, vs;
  if (env.q == 1.0) {
    const std::uint64_t n = mc.n_sweeps * mc.n_chains;
    us.assign(1, std::vector<double>(n));
    vs.assign(1, std::vector<double>(n));
    parallel_for(n, workers, [&](std::size_t i) {
      Rng rng(derive_seed(seed, i));
      const auto p = build_clusters(sample_configuration(env, box, rng));
      us[0][i] = event_holds(p, u);
      vs[0][i] = event_holds(p, v);
    });
  } else {
    auto both = detail::run_chains(env, box, mc, seed, workers, [&](const Configuration& c) {
      const auto p = build_clusters(c);
      return (event_holds(p, u) ? 1.0 : 0.0) + (event_holds(p, v) ? 2.0 : 0.0);
    });
    for (const auto& c : both) {
      us.emplace_back();
      vs.emplace_back();
      for (double x : c) {
        const int b = static_cast<int>(x);
        us.back().push_back(b & 1);
        vs.back().push_back((b >> 1) & 1);
      }
    }
  }
  FkgReport r;
  double n = 0;
  for (std::size_t c = 0; c < us.size(); ++c)
    for (std::size_t i = 0; i < us[c].size(); ++i) {
      r.p_u += us[c][i];
      r.p_v += vs[c][i];
      r.p_uv += us[c][i] * vs[c][i];
      n += 1;
    }
  r.p_u /= n;
  r.p_v /= n;
  r.p_uv /= n;
  r.covariance = r.p_uv - r.p_u * r.p_v;
  double var = 0, ess = 0;
  for (std::size_t c = 0; c < us.size(); ++c) {
    std::vector<double> z(us[c].size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (us[c][i] - r.p_u) * (vs[c][i] - r.p_v);
    var += variance(z) * static_cast<double>(z.size());
    ess += env.q == 1.0 ? static_cast<double>(z.size()) : effective_sample_size(z);
  }
  var /= n;
  r.sigma = std::sqrt(var / std::max(ess, 1.0));
  r.violation = r.covariance < -3.0 * r.sigma;
  return r;
}

/// Detailed-balance residual for inserting time t on a line of omega:
/// |log(pi(w) P(w -> w+t)) - log(pi(w+t) P(w+t -> w))|, using the
/// unnormalised density and the chain's own acceptance probabilities.
inline double detailed_balance_gap(const Environment& env, const Configuration& omega, std::size_t line, double t) {
  RcmChain forward(env, omega, 0);
  RcmChain::Move birth{true, line, t, 0};
  const double a_birth = forward.acceptance(birth);
  Configuration plus = omega;
  auto& pts = line < plus.deaths.size() ? plus.deaths[line] : plus.bonds[line - plus.deaths.size()];
  const auto pos = std::upper_bound(pts.begin(), pts.end(), t);
  const auto idx = static_cast<std::size_t>(pos - pts.begin());
  pts.insert(pos, t);
  RcmChain backward(env, plus, 0);
  RcmChain::Move death{false, line, 0.0, idx};
  const double a_death = backward.acceptance(death);
  const double n1 = static_cast<double>(pts.size());
  const double len = omega.box.height();
  const double lhs = forward.log_density(omega) - std::log(len) + std::log(a_birth);
  const double rhs = backward.log_density(plus) - std::log(n1) + std::log(a_death);
  return std::abs(lhs - rhs);
}

}  // namespace qpfk
