#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/core/lattice.hpp"
#include "qpfk/core/parallel.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/core/stats.hpp"
#include "qpfk/dynamics/recurrence.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/multiscale/exponents.hpp"
#include "qpfk/percolation/environment.hpp"
#include "qpfk/percolation/estimate.hpp"
#include "qpfk/sampling/sampling_function.hpp"
#include "qpfk/sampling/transversality.hpp"

namespace qpfk {

/// Monte Carlo budget shared by the diagnostics.
struct MsaBudget {
  std::uint64_t n_samples = 20000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double z = kZ95;             // interval width used for verdicts
  double T_log_cap = 700.0;    // heights above exp(cap) are truncated and flagged
};

/// Height exponent actually used for L^nu and whether it was truncated.
struct Height {
  double T_log;
  bool truncated;
};

inline Height height_for(std::int64_t L, double nu, double cap) {
  const double t = std::pow(static_cast<double>(L), nu);
  return t > cap ? Height{cap, true} : Height{t, false};
}

enum class Verdict { regular, singular, undecided };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::regular: return "regular";
    case Verdict::singular: return "singular";
    default: return "undecided";
  }
}

struct RegularityResult {
  Verdict verdict = Verdict::undecided;
  EstimateCI estimate;
  double log_threshold = 0;  // -m L
  double T_log = 0;
  bool truncated = false;

  nlohmann::json to_json() const {
    return {{"verdict", to_string(verdict)}, {"estimate", estimate.estimate}, {"ci_lo", estimate.ci_lo},
            {"ci_hi", estimate.ci_hi}, {"n", estimate.trials}, {"log_threshold", log_threshold},
            {"T_log", T_log}, {"truncated", truncated}};
  }
};

/// Compares a log probability interval against log_threshold.
inline Verdict compare_log(double log_lo, double log_hi, double log_threshold) {
  if (log_hi < log_threshold) return Verdict::regular;
  if (log_lo > log_threshold) return Verdict::singular;
  return Verdict::undecided;
}

/// (m, L)-regularity of x: Q(x <-> boundary of Lambda_L(x) x [-T, T]) with
/// T = exp(L^nu), against exp(-m L). The environment must cover Lambda_L(x).
inline RegularityResult is_regular(const Environment& env, const Site& x, double m, std::int64_t L, double nu,
                                   const MsaBudget& b) {
  RegularityResult r;
  const auto h = height_for(L, nu, b.T_log_cap);
  r.T_log = h.T_log;
  r.truncated = h.truncated;
  r.log_threshold = -m * static_cast<double>(L);
  const auto box = SpaceTimeBox::cylinder(x, L, std::exp(h.T_log));
  r.estimate = estimate_event(env, box, Event::escape(x), b.n_samples, b.seed, b.workers);
  const auto ci = r.estimate.interval(b.z);
  r.verdict = compare_log(std::log(ci.lo), std::log(ci.hi), r.log_threshold);
  return r;
}

struct SimplicityReport {
  std::string verdict;  // holds | violated | undecided
  std::optional<Site> witness;
  std::size_t sites = 0, resonant_boxes = 0, regular = 0, singular = 0, undecided = 0;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"verdict", verdict}, {"sites", sites}, {"resonant_boxes", resonant_boxes},
                        {"regular", regular}, {"singular", singular}, {"undecided", undecided}};
    j["witness"] = witness ? nlohmann::json(witness->to_string()) : nlohmann::json(nullptr);
    return j;
  }
};

/// m-simplicity on a scan region: every (m, L)-singular site must have an
/// eps-resonant box Lambda_L(x). Sites whose box is resonant satisfy the
/// implication and are not simulated. The environment must cover the scan
/// region enlarged by L.
inline SimplicityReport simplicity_audit(const Environment& env, const Region& scan, double m, std::int64_t L, double nu,
                                         double log_eps, const MsaBudget& b) {
  SimplicityReport rep;
  rep.sites = scan.size();
  std::vector<char> resonant(scan.size(), 0);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Region box = Region::ball(scan.site(i), L);
    for (std::size_t j = 0; j < box.size() && !resonant[i]; ++j) resonant[i] = env.log_at(box.site(j)) < log_eps;
  }
  std::vector<Verdict> v(scan.size(), Verdict::regular);
  MsaBudget inner = b;
  inner.workers = 1;
  parallel_for(scan.size(), b.workers, [&](std::size_t i) {
    if (resonant[i]) return;
    MsaBudget bi = inner;
    bi.seed = derive_seed(b.seed, i);
    v[i] = is_regular(env, scan.site(i), m, L, nu, bi).verdict;
  });
  bool any_undecided = false;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (resonant[i]) {
      ++rep.resonant_boxes;
      continue;
    }
    if (v[i] == Verdict::regular) ++rep.regular;
    if (v[i] == Verdict::undecided) {
      ++rep.undecided;
      any_undecided = true;
    }
    if (v[i] == Verdict::singular) {
      ++rep.singular;
      if (!rep.witness) rep.witness = scan.site(i);
    }
  }
  rep.verdict = rep.witness ? "violated" : any_undecided ? "undecided" : "holds";
  return rep;
}

/// Escape estimate in a uniform environment for a list of lambdas, all
/// thinned from one world per sample at lambda_dom (monotone per sample).
inline std::vector<EstimateCI> coupled_escape(const SpaceTimeBox& box, double delta, double lambda_dom,
                                              const std::vector<double>& lambdas, std::uint64_t n, std::uint64_t seed,
                                              unsigned workers) {
  const auto env = Environment::constant(box.region, delta, lambda_dom);
  const auto origin = box.region.site(box.region.size() / 2);
  return estimate_lambda_sweep(env, box, Event::escape(origin), lambdas, n, seed, workers).estimates;
}

struct LambdaSearchResult {
  double lambda = 0;
  double delta_min = 0;
  double log_threshold = 0;
  EstimateCI estimate;
  int iterations = 0;

  nlohmann::json to_json() const {
    return {{"lambda", lambda}, {"delta_min", delta_min}, {"log_threshold", log_threshold}, {"estimate", estimate.estimate},
            {"ci_hi", estimate.ci_hi}, {"n", estimate.trials}, {"iterations", iterations}};
  }
};

/// Largest lambda (bisection in log lambda, relative tolerance tol) for
/// which the escape estimate from the centre of Lambda_L1(0) x [-T, T],
/// T = exp(L1^nu), in the uniform environment delta' = min_{Lambda_L1(0)} h(T^x theta),
/// has its upper z-sigma bound below exp(-m1 L1). Lambdas are compared on
/// one coupled sample set, so passing is monotone in lambda.
inline LambdaSearchResult initial_lambda_search(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta,
                                                double m1, std::int64_t L1, double nu, double tol, const MsaBudget& b,
                                                double floor = 1e-12) {
  LambdaSearchResult r;
  const Region box_region = Region::ball(Site::origin(sys.lattice_dim()), L1);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < box_region.size(); ++i) dmin = std::min(dmin, h.eval(sys.orbit_point(theta, box_region.site(i))));
  r.delta_min = dmin;
  if (!(dmin > 0)) throw std::domain_error("initial_lambda_search: delta' = 0 on the box (theta is resonant)");
  r.log_threshold = -m1 * static_cast<double>(L1);
  const auto hgt = height_for(L1, nu, b.T_log_cap);
  const auto box = SpaceTimeBox::cylinder(Site::origin(sys.lattice_dim()), L1, std::exp(hgt.T_log));

  // a bracket [lo, hi] with lo passing and hi failing, on a fixed dominating world
  double hi = std::max(dmin, floor) * 4.0;
  auto passes = [&](const std::vector<double>& ls, std::vector<EstimateCI>* est = nullptr) {
    const auto e = coupled_escape(box, dmin, ls.back(), ls, b.n_samples, b.seed, b.workers);
    std::vector<char> ok;
    for (const auto& x : e) ok.push_back(std::log(x.interval(3.0).hi) < r.log_threshold);
    if (est) *est = e;
    return ok;
  };
  if (!passes({floor})[0]) {
    std::ostringstream msg;
    msg << "initial_lambda_search: no passing lambda above floor " << floor;
    throw std::runtime_error(msg.str());
  }
  while (passes({floor, hi})[1]) {
    hi *= 4.0;
    if (hi > 1e6) throw std::runtime_error("initial_lambda_search: escape stays below the threshold up to lambda = 1e6");
  }
  const double dom = hi;
  double lo = floor;
  while (hi / lo > 1.0 + tol && r.iterations < 200) {
    ++r.iterations;
    const double mid = std::sqrt(lo * hi);
    (passes({mid, dom})[0] ? lo : hi) = mid;
  }
  std::vector<EstimateCI> est;
  passes({lo, dom}, &est);
  r.lambda = lo;
  r.estimate = est[0];
  return r;
}

struct ResonanceDensity {
  EstimateCI estimate;
  double box_count = 0;       // C_d = (2L + 1)^d
  std::uint64_t psi_inverse = 0;
  double bound = 0;           // C_d |F| / Psi^{-1}(eps)

  nlohmann::json to_json() const {
    return {{"estimate", estimate.estimate}, {"ci_lo", estimate.ci_lo}, {"ci_hi", estimate.ci_hi}, {"n", estimate.trials},
            {"std_error", estimate.std_error()}, {"C_d", box_count}, {"psi_inverse", psi_inverse},
            {"bound", std::isfinite(bound) ? nlohmann::json(bound) : std::isnan(bound) ? nlohmann::json(nullptr) : nlohmann::json("inf")}};
  }
};

/// mu{theta : Lambda(0) of side 2L + 1 contains an eps-resonant site} by
/// uniform phase sampling, with the Kac-type bound beside it.
inline ResonanceDensity resonance_density(const SamplingFunction& h, const DynamicalSystem& sys, double log_eps, std::int64_t L,
                                          std::uint64_t n_theta, std::uint64_t seed, unsigned workers = 1,
                                          const ZetaStaircase* staircase = nullptr) {
  ResonanceDensity r;
  const int d = sys.lattice_dim();
  r.box_count = std::pow(2.0 * static_cast<double>(L) + 1.0, d);
  if (log_eps == -std::numeric_limits<double>::infinity()) {
    r.bound = 0;
  } else {
    const ZetaStaircase st = staircase ? *staircase : ZetaStaircase::for_system(sys);
    const TransversalityProfile prof(h, st);
    try {
      r.psi_inverse = prof.psi_inverse(log_eps);
      r.bound = r.psi_inverse ? r.box_count * static_cast<double>(h.zeros().size()) / static_cast<double>(r.psi_inverse)
                              : std::numeric_limits<double>::infinity();
    } catch (const std::out_of_range&) {
      r.bound = std::numeric_limits<double>::quiet_NaN();  // eps beyond the tabulated staircase
    }
  }
  const Region box = Region::closed_ball(Site::origin(d), L);
  std::vector<char> hit(n_theta, 0);
  parallel_for(n_theta, workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const Phase theta = sys.sample_phase(rng);
    for (std::size_t j = 0; j < box.size(); ++j)
      if (h.log_eval(sys.orbit_point(theta, box.site(j))) < log_eps) {
        hit[i] = 1;
        return;
      }
  });
  std::uint64_t k = 0;
  for (char c : hit) k += c;
  r.estimate = EstimateCI::from_counts(k, n_theta, seed);
  return r;
}

struct ResonanceScan {
  std::int64_t window = 0;
  std::int64_t half_width = 0;
  std::vector<Site> resonant;
  std::size_t max_per_window = 0;
  std::int64_t min_separation = -1;  // -1 with fewer than two resonant sites

  /// Largest number of resonant sites in one window of side w, windows
  /// anchored at resonant sites.
  std::size_t max_in_window(std::int64_t w) const {
    std::size_t best = 0;
    for (const auto& a : resonant) {
      std::size_t c = 0;
      for (const auto& b : resonant) {
        bool inside = true;
        for (int i = 0; i < a.dim; ++i) inside &= b[i] - a[i] >= 0 && b[i] - a[i] < w;
        c += inside;
      }
      best = std::max(best, c);
    }
    return best;
  }

  nlohmann::json to_json() const {
    std::vector<std::string> sites;
    for (const auto& s : resonant) sites.push_back(s.to_string());
    return {{"window", window}, {"half_width", half_width}, {"resonant", sites},
            {"max_per_window", max_per_window}, {"min_separation", min_separation}};
  }
};

/// Exhaustive scan of [-half_width, half_width]^d for eps-resonant sites,
/// with the largest number of them inside one window of side `window`
/// (windows anchored at resonant sites) and the least pairwise sup-distance.
inline ResonanceScan resonance_scan(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double log_eps,
                                    std::int64_t window, std::int64_t half_width) {
  const int d = sys.lattice_dim();
  const double n = std::pow(2.0 * static_cast<double>(half_width) + 1.0, d);
  if (n > 5e7) throw std::length_error("resonance_scan: " + std::to_string(n) + " sites exceed the scan limit");
  ResonanceScan s;
  s.window = window;
  s.half_width = half_width;
  s.resonant = resonant_sites(h, sys, theta, Region::closed_ball(Site::origin(d), half_width), log_eps);
  s.max_per_window = s.max_in_window(window);
  for (std::size_t i = 0; i < s.resonant.size(); ++i)
    for (std::size_t j = i + 1; j < s.resonant.size(); ++j) {
      const auto sep = (s.resonant[j] - s.resonant[i]).sup_norm();
      s.min_separation = s.min_separation < 0 ? sep : std::min(s.min_separation, sep);
    }
  return s;
}

enum class DecayEstimator { direct, splitting };

struct DecayScan {
  struct Row {
    std::int64_t L;
    double T_log;
    bool truncated;
    double estimate, std_error;
    double log_estimate, log_std_error;  // log_estimate is -inf without hits
    std::uint64_t n;                     // samples (direct) or worlds per level x replicas
  };
  DecayEstimator method = DecayEstimator::splitting;
  std::vector<Row> rows;
  LinearFit fit;
  double slope_ci_hi = 0;  // slope + z * se
  bool fitted = false;     // every row has a finite log estimate
  bool decaying = false;   // fitted and slope_ci_hi < 0

  void write_csv(std::ostream& os) const {
    os << "L,T_log,truncated,method,estimate,std_error,log_estimate,log_std_error,n\n";
    for (const auto& r : rows)
      os << r.L << ',' << r.T_log << ',' << r.truncated << ',' << (method == DecayEstimator::direct ? "direct" : "splitting")
         << ',' << r.estimate << ',' << r.std_error << ',' << r.log_estimate << ',' << r.log_std_error << ',' << r.n << '\n';
  }
  nlohmann::json to_json() const {
    return {{"slope", fit.slope}, {"slope_se", fit.slope_se}, {"intercept", fit.intercept}, {"slope_ci_hi", slope_ci_hi},
            {"fitted", fitted}, {"decaying", decaying}};
  }
};

struct DecayOptions {
  DecayEstimator method = DecayEstimator::splitting;
  std::uint64_t per_level = 500;  // splitting: worlds per level
  std::uint64_t replicas = 10;    // splitting: independent replicas
};

/// Escape from (0, 0) of Lambda_L(0) x [-T(L), T(L)] at one scale. Direct
/// sampling uses b.n_samples; splitting resolves probabilities far below 1 / n.
inline DecayScan::Row decay_row(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double lambda,
                                std::int64_t L, double nu, const MsaBudget& b, const DecayOptions& opt, std::uint64_t seed) {
  const auto origin = Site::origin(sys.lattice_dim());
  const auto hgt = height_for(L, nu, b.T_log_cap);
  const auto box = SpaceTimeBox::cylinder(origin, L, std::exp(hgt.T_log));
  const auto env = Environment::from_sampling(h, sys, theta, box.region, lambda);
  DecayScan::Row r{L, hgt.T_log, hgt.truncated, 0, 0, 0, 0, 0};
  if (opt.method == DecayEstimator::direct) {
    const auto e = estimate_event(env, box, Event::escape(origin), b.n_samples, seed, b.workers);
    r.estimate = e.estimate;
    r.std_error = e.std_error();
    r.n = e.trials;
  } else {
    const auto e = escape_splitting(env, box, origin, opt.per_level, opt.replicas, seed, b.workers);
    r.estimate = e.estimate;
    r.std_error = e.std_error;
    r.n = opt.per_level * opt.replicas;
  }
  r.log_estimate = std::log(r.estimate);
  r.log_std_error = r.estimate > 0 ? r.std_error / r.estimate : std::numeric_limits<double>::infinity();
  return r;
}

/// Weighted fit of log(estimate) against L; decaying when slope + z se < 0.
inline void fit_decay(DecayScan& s, double z) {
  s.fitted = s.rows.size() >= 2;
  for (const auto& r : s.rows) s.fitted &= std::isfinite(r.log_estimate) && r.log_std_error > 0;
  s.decaying = false;
  if (!s.fitted) return;
  std::vector<double> x, y, sig;
  for (const auto& r : s.rows) {
    x.push_back(static_cast<double>(r.L));
    y.push_back(r.log_estimate);
    sig.push_back(r.log_std_error);
  }
  s.fit = weighted_linear_fit(x, y, sig);
  s.slope_ci_hi = s.fit.slope + z * s.fit.slope_se;
  s.decaying = s.slope_ci_hi < 0;
}

/// decay_row for each L (scale i seeded by derive_seed(b.seed, i)) and the fit.
inline DecayScan decay_scan(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double lambda,
                            const std::vector<std::int64_t>& Ls, double nu, const MsaBudget& b, const DecayOptions& opt = {}) {
  DecayScan s;
  s.method = opt.method;
  for (std::size_t i = 0; i < Ls.size(); ++i) s.rows.push_back(decay_row(h, sys, theta, lambda, Ls[i], nu, b, opt, derive_seed(b.seed, i)));
  fit_decay(s, b.z);
  return s;
}

/// Per-scale multiscale diagnostic.
struct MsaScaleReport {
  int k = 0;
  std::int64_t L = 0;
  double log_eps = 0, m = 0, T_log = 0;
  bool truncated = false;
  ResonanceDensity a;
  double a_reference = 0;  // L^{d - gamma / xi'}
  std::optional<SimplicityReport> simplicity;
  std::optional<ResonanceScan> windows;
  // the same scan counted in windows of side L^kappa and 2L+1
  std::size_t max_per_kappa_window = 0, max_per_box_window = 0;
  std::string note;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"k", k}, {"L", L}, {"log_eps", log_eps}, {"m", m}, {"T_log", T_log}, {"truncated", truncated},
                        {"a", a.to_json()}, {"a_reference", a_reference}, {"note", note}};
    j["simplicity"] = simplicity ? simplicity->to_json() : nlohmann::json(nullptr);
    j["windows"] = windows ? windows->to_json() : nlohmann::json(nullptr);
    if (windows) {
      j["max_per_kappa_window"] = max_per_kappa_window;
      j["max_per_box_window"] = max_per_box_window;
    }
    return j;
  }
};

struct MsaDiagnosticBudget {
  MsaBudget mc;
  std::uint64_t n_theta = 100000;
  std::int64_t audit_half_width = 8;      // simplicity audit on Lambda of this radius
  std::int64_t max_window_scan = 2000000; // resonance scans wider than this are skipped
  double xi_prime = 0;                    // 0: 1.05 xi
  MassDecrement decrement = MassDecrement::tau;
};

struct MsaReport {
  MsaExponents exponents;
  MsaSchedule schedule;
  std::vector<MsaScaleReport> scales;

  nlohmann::json to_json() const {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& r : scales) s.push_back(r.to_json());
    return {{"exponents", exponents.to_json()}, {"schedule", schedule.to_json()}, {"scales", s}};
  }

  void write_csv(std::ostream& os) const {
    os << "k,L,log_eps,m,T_log,truncated,a,a_ci_lo,a_ci_hi,a_bound,a_reference,simplicity,resonant_max_per_window,resonant_max_per_kappa_window,resonant_max_per_box_window\n";
    for (const auto& r : scales) {
      os << r.k << ',' << r.L << ',' << r.log_eps << ',' << r.m << ',' << r.T_log << ',' << r.truncated << ','
         << r.a.estimate.estimate << ',' << r.a.estimate.ci_lo << ',' << r.a.estimate.ci_hi << ',' << r.a.bound << ','
         << r.a_reference << ',' << (r.simplicity ? r.simplicity->verdict : "skipped") << ','
         << (r.windows ? std::to_string(r.windows->max_per_window) : "skipped") << ','
         << (r.windows ? std::to_string(r.max_per_kappa_window) : "skipped") << ','
         << (r.windows ? std::to_string(r.max_per_box_window) : "skipped") << '\n';
    }
  }
};

/// Scales 0..k_max: resonance density a_k with its bound and reference
/// decay, the simplicity audit around the origin, and the count of
/// resonant sites per L_k^alpha window.
inline MsaReport run_msa_diagnostic(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double lambda,
                                    const MsaExponents& e, std::int64_t L0, double m0, int k_max, const MsaDiagnosticBudget& b) {
  MsaReport rep;
  rep.exponents = e;
  // a schedule that overflows is cut at the last representable scale
  int k_ok = k_max;
  for (;; --k_ok) {
    try {
      rep.schedule = make_schedule(e, L0, m0, k_ok, b.decrement);
      break;
    } catch (const std::overflow_error&) {
      if (k_ok == 0) throw;
    }
  }
  const double xi_p = b.xi_prime > 0 ? b.xi_prime : 1.05 * e.xi;
  const auto staircase = ZetaStaircase::for_system(sys);
  const int d = sys.lattice_dim();
  for (int k = 0; k <= k_ok; ++k) {
    MsaScaleReport r;
    r.k = k;
    r.L = rep.schedule.L[static_cast<std::size_t>(k)];
    r.log_eps = rep.schedule.eps_log[static_cast<std::size_t>(k)];
    r.m = rep.schedule.m[static_cast<std::size_t>(k)];
    const auto hgt = height_for(r.L, e.nu, b.mc.T_log_cap);
    r.T_log = hgt.T_log;
    r.truncated = hgt.truncated;
    r.a_reference = std::pow(static_cast<double>(r.L), d - e.gamma / xi_p);
    r.a = resonance_density(h, sys, r.log_eps, r.L, b.n_theta, derive_seed(b.mc.seed, 100 + k), b.mc.workers, &staircase);
    if (std::isnan(r.a.bound)) r.note += "a_k bound unavailable (eps beyond the tabulated recurrence); ";
    const double wlen = std::round(std::pow(static_cast<double>(r.L), e.alpha));
    if (wlen <= static_cast<double>(b.max_window_scan)) {
      const auto w = static_cast<std::int64_t>(wlen);
      r.windows = resonance_scan(h, sys, theta, r.log_eps, w, w);
      r.max_per_kappa_window = r.windows->max_in_window(static_cast<std::int64_t>(std::round(std::pow(static_cast<double>(r.L), e.kappa))));
      r.max_per_box_window = r.windows->max_in_window(2 * r.L + 1);
    } else {
      r.note += "window scan skipped (L^alpha too large); ";
    }
    if (r.L <= 64) {
      const Region scan = Region::closed_ball(Site::origin(d), b.audit_half_width);
      const Region cover = Region::closed_ball(Site::origin(d), b.audit_half_width + r.L);
      const auto env = Environment::from_sampling(h, sys, theta, cover, lambda);
      MsaBudget mc = b.mc;
      mc.seed = derive_seed(b.mc.seed, 200 + k);
      r.simplicity = simplicity_audit(env, scan, r.m, r.L, e.nu, r.log_eps, mc);
    } else {
      r.note += "simplicity audit skipped (scale too large); ";
    }
    rep.scales.push_back(std::move(r));
  }
  return rep;
}

}  // namespace qpfk
