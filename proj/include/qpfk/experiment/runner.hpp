#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/coarse/coarse.hpp"
#include "qpfk/dynamics/recurrence.hpp"
#include "qpfk/experiment/spec.hpp"
#include "qpfk/multiscale/diagnostics.hpp"
#include "qpfk/random_cluster/rcm.hpp"

namespace qpfk {

inline constexpr const char* kVersion = "0.1.0";

struct RunContext {
  std::filesystem::path out_dir;
  unsigned workers = 1;
  const std::atomic<bool>* stop = nullptr;

  bool stopping() const { return stop && stop->load(); }
};

struct RunResult {
  std::vector<std::string> outputs;
  nlohmann::json summary = nlohmann::json::object();
  bool truncated = false;
};

namespace detail {

/// Collects output files; CSV bodies are built in memory and written whole.
class Outputs {
 public:
  explicit Outputs(const RunContext& ctx, RunResult& r) : ctx_(ctx), r_(r) {}

  void write(const std::string& name, const std::string& body) {
    std::ofstream f(ctx_.out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (ctx_.out_dir / name).string());
    f << body;
    if (!f) throw std::runtime_error("write failed for " + (ctx_.out_dir / name).string());
    r_.outputs.push_back(name);
  }

  void csv(const std::string& name, const std::ostringstream& os, bool truncated) {
    write(name, os.str() + (truncated ? "# truncated\n" : ""));
  }

  void json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

 private:
  const RunContext& ctx_;
  RunResult& r_;
};

inline std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(12);
  return os;
}

struct ResolvedPhase {
  Phase theta;
  std::uint64_t index = 0;
  double lambda = 0;
  std::optional<LambdaSearchResult> search;
  nlohmann::json failures = nlohmann::json::array();

  nlohmann::json to_json() const {
    nlohmann::json j = {{"theta", phase_to_json(theta)}, {"theta_index", index}, {"lambda", lambda}, {"failed_draws", failures}};
    j["lambda_search"] = search ? search->to_json() : nlohmann::json(nullptr);
    return j;
  }
};

/// Picks theta and lambda: a fixed lambda takes the first draw; a search
/// walks through `tries` consecutive draws until one admits a lambda.
inline ResolvedPhase resolve_phase(const ExperimentSpec& s, const LambdaChoice& lc, double nu, const MsaBudget& b) {
  ResolvedPhase r;
  const std::uint64_t tries = lc.value ? 1 : s.theta.tries;
  for (std::uint64_t i = 0; i < tries; ++i) {
    r.index = s.theta.index + i;
    r.theta = s.theta.draw(*s.sys, s.seed, r.index);
    if (lc.value) {
      r.lambda = *lc.value;
      return r;
    }
    MsaBudget sb = b;
    sb.n_samples = lc.n_samples;
    sb.seed = derive_seed(s.seed, 0x1a3bull, r.index);
    try {
      r.search = initial_lambda_search(*s.h, *s.sys, r.theta, lc.m1, lc.L1, nu, lc.tol, sb);
      r.lambda = r.search->lambda;
      return r;
    } catch (const std::exception& e) {
      r.failures.push_back({{"theta_index", r.index}, {"reason", e.what()}});
    }
  }
  throw std::runtime_error("lambda search failed for all " + std::to_string(tries) + " phase draws");
}

inline void run_calibration(const ExperimentSpec& s, const RunContext& ctx, Outputs& out, RunResult& res) {
  const auto& c = std::get<CalibrationParams>(s.params);
  struct Check {
    const char* name;
    double expected;
    std::function<EstimateCI(std::uint64_t)> run;
  };
  const Site o{0};
  const std::vector<Check> checks = {
      {"same_line_connect", std::exp(-c.delta * c.t),
       [&](std::uint64_t seed) {
         const auto box = SpaceTimeBox::cylinder(o, 1, c.T);
         return estimate_event(Environment::constant(box.region, c.delta, 0.0), box, Event::connect({o, 0.0}, {o, c.t}), c.n_samples,
                               seed, ctx.workers);
       }},
      {"escape_lambda0", 2 * std::exp(-c.delta * c.T) - std::exp(-2 * c.delta * c.T),
       [&](std::uint64_t seed) {
         const auto box = SpaceTimeBox::cylinder(o, 3, c.T);
         return estimate_event(Environment::constant(box.region, c.delta, 0.0), box, Event::escape(o), c.n_samples, seed, ctx.workers);
       }},
      {"edge_connect_delta0", -std::expm1(-2 * c.T * c.lambda),
       [&](std::uint64_t seed) {
         const auto box = SpaceTimeBox(Region(Site{0}, Site{1}), -c.T, c.T);
         return estimate_event(Environment::constant(box.region, 0.0, c.lambda), box, Event::connect({o, 0.0}, {Site{1}, 0.0}),
                               c.n_samples, seed, ctx.workers);
       }},
  };
  auto os = csv_stream();
  os << "check,expected,estimate,ci_lo,ci_hi,sigma,z_score,n,pass\n";
  nlohmann::json rows = nlohmann::json::array();
  bool all = true, truncated = false;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (ctx.stopping()) {
      truncated = true;
      break;
    }
    const auto e = checks[i].run(derive_seed(s.seed, i));
    const auto w1 = e.interval(1.0);
    const double sigma = 0.5 * (w1.hi - w1.lo);
    const double zs = sigma > 0 ? (e.estimate - checks[i].expected) / sigma : 0.0;
    const auto wz = e.interval(c.z);
    const bool pass = checks[i].expected >= wz.lo && checks[i].expected <= wz.hi;
    all &= pass;
    os << checks[i].name << ',' << checks[i].expected << ',' << e.estimate << ',' << e.ci_lo << ',' << e.ci_hi << ',' << sigma << ','
       << zs << ',' << e.trials << ',' << (pass ? "pass" : "fail") << '\n';
    rows.push_back({{"check", checks[i].name}, {"pass", pass}, {"z_score", zs}});
  }
  out.csv("calibration.csv", os, truncated);
  res.summary = {{"all_pass", all && !truncated}, {"checks", rows}};
  res.truncated = truncated;
}

inline void run_decay(const ExperimentSpec& s, const RunContext& ctx, Outputs& out, RunResult& res) {
  const auto& d = std::get<DecayParams>(s.params);
  MsaBudget b = d.budget;
  b.workers = ctx.workers;
  const auto ph = resolve_phase(s, d.lambda, d.nu, b);
  b.seed = derive_seed(s.seed, 0xdeca);
  DecayScan scan;
  scan.method = d.options.method;
  bool truncated = false;
  for (std::size_t i = 0; i < d.Ls.size(); ++i) {
    if (ctx.stopping()) {
      truncated = true;
      break;
    }
    scan.rows.push_back(decay_row(*s.h, *s.sys, ph.theta, ph.lambda, d.Ls[i], d.nu, b, d.options, derive_seed(b.seed, i)));
  }
  if (!truncated) fit_decay(scan, b.z);
  auto os = csv_stream();
  scan.write_csv(os);
  out.csv("decay.csv", os, truncated);
  res.summary = {{"fit", scan.to_json()}, {"phase", ph.to_json()}, {"nu", d.nu}};
  out.json("decay.json", res.summary);
  res.truncated = truncated;
}

inline void run_sweep(const ExperimentSpec& s, const RunContext& ctx, Outputs& out, RunResult& res) {
  const auto& w = std::get<SweepParams>(s.params);
  const Phase theta = s.sys ? s.theta.draw(*s.sys, s.seed, s.theta.index) : Phase(1);
  const int d = s.sys ? s.sys->lattice_dim() : 1;
  const auto origin = Site::origin(d);
  auto os = csv_stream();
  os << "L,T,lambda,q,estimate,ci_lo,ci_hi,n_effective,analytic\n";
  nlohmann::json boxes = nlohmann::json::array();
  bool truncated = false;
  for (std::size_t n = 0; n < w.boxes.size() && !truncated; ++n) {
    const auto box = SpaceTimeBox::cylinder(origin, w.boxes[n].L, w.boxes[n].T);
    auto env = w.delta ? Environment::constant(box.region, *w.delta, 0.0, w.q)
                       : Environment::from_sampling(*s.h, *s.sys, theta, box.region, 0.0, w.q);
    // at lambda = 0 the origin escapes iff its line survives to the top or the bottom
    const double d0 = env.at(origin);
    const double analytic0 = w.boxes[n].L >= 2 ? 2 * std::exp(-d0 * w.boxes[n].T) - std::exp(-2 * d0 * w.boxes[n].T) : 1.0;
    std::vector<EstimateCI> est;
    std::size_t violations = 0;
    if (w.q == 1.0) {
      if (ctx.stopping()) {
        truncated = true;
        break;
      }
      const auto sw = estimate_lambda_sweep(env, box, Event::escape(origin), w.lambdas, w.n_samples, derive_seed(s.seed, n), ctx.workers);
      est = sw.estimates;
      for (const auto& row : sw.indicators)
        for (std::size_t j = 1; j < row.size(); ++j) violations += row[j] < row[j - 1];
    } else {
      for (std::size_t j = 0; j < w.lambdas.size(); ++j) {
        if (ctx.stopping()) {
          truncated = true;
          break;
        }
        est.push_back(rcm_estimate(env.with_lambda(w.lambdas[j]), box, Event::escape(origin), w.mc, derive_seed(s.seed, n, j), ctx.workers)
                          .estimate);
      }
    }
    nlohmann::json crossover = nullptr;
    for (std::size_t j = 0; j < est.size(); ++j) {
      os << w.boxes[n].L << ',' << w.boxes[n].T << ',' << w.lambdas[j] << ',' << w.q << ',' << est[j].estimate << ',' << est[j].ci_lo
         << ',' << est[j].ci_hi << ',' << est[j].n_effective << ',';
      if (w.lambdas[j] == 0.0) os << analytic0;
      os << '\n';
      if (crossover.is_null() && j > 0 && (est[j - 1].estimate < w.threshold) != (est[j].estimate < w.threshold))
        crossover = {w.lambdas[j - 1], w.lambdas[j]};
    }
    boxes.push_back({{"L", w.boxes[n].L}, {"T", w.boxes[n].T}, {"crossover", crossover}, {"monotone_violations", violations}});
  }
  out.csv("sweep.csv", os, truncated);
  res.summary = {{"threshold", w.threshold}, {"boxes", boxes}};
  if (s.sys) res.summary["theta"] = phase_to_json(theta);
  out.json("sweep.json", res.summary);
  res.truncated = truncated;
}

inline void run_msa(const ExperimentSpec& s, const RunContext& ctx, Outputs& out, RunResult& res) {
  const auto& m = std::get<MsaParams>(s.params);
  MsaDiagnosticBudget b = m.budget;
  b.mc.workers = ctx.workers;
  const auto ph = resolve_phase(s, m.lambda, m.exponents.nu, b.mc);
  b.mc.seed = derive_seed(s.seed, 0x35a);
  if (ctx.stopping()) {
    res.truncated = true;
    auto os = csv_stream();
    out.csv("msa.csv", os, true);
    return;
  }
  const auto rep = run_msa_diagnostic(*s.h, *s.sys, ph.theta, ph.lambda, m.exponents, m.L0, m.m0, m.k_max, b);
  auto os = csv_stream();
  rep.write_csv(os);
  out.csv("msa.csv", os, false);
  res.summary = rep.to_json();
  res.summary["phase"] = ph.to_json();
  out.json("msa.json", res.summary);
}

inline void run_coarse(const ExperimentSpec& s, const RunContext& ctx, Outputs& out, RunResult& res) {
  auto c = std::get<CoarseOrderParams>(s.params);
  const Phase theta = s.theta.draw(*s.sys, s.seed, s.theta.index);
  const int d = s.sys->lattice_dim();
  nlohmann::json scale = nullptr;
  if (c.auto_L) {
    const std::vector<std::int64_t> spatial(c.coarse.extent.begin(), c.coarse.extent.begin() + d);
    const auto bs = block_scale_search(*s.h, *s.sys, theta, c.lambda, c.coarse.tau, spatial, c.target, c.L_max);
    c.coarse.L = bs.L;
    scale = bs.to_json();
  }
  std::vector<CrossingResult> runs(c.replicates);
  std::vector<char> done(c.replicates, 0);
  std::optional<CoarseLattice> first;
  parallel_for(c.replicates, ctx.workers, [&](std::size_t r) {
    if (ctx.stopping()) return;
    auto g = build_coarse_lattice(*s.h, *s.sys, theta, c.lambda, c.coarse, derive_seed(s.seed, r), 1);
    runs[r] = coarse_percolates(g);
    done[r] = 1;
    if (r == 0) first = std::move(g);
  });
  // keep the finished prefix so the output does not depend on scheduling
  std::size_t n_done = 0;
  while (n_done < runs.size() && done[n_done]) ++n_done;
  const bool truncated = n_done < runs.size();
  auto os = csv_stream();
  os << "replicate,crosses,largest_cluster_fraction,occupied_sites\n";
  std::size_t crossings = 0;
  for (std::size_t r = 0; r < n_done; ++r) {
    crossings += runs[r].crosses;
    os << r << ',' << runs[r].crosses << ',' << runs[r].largest_cluster_fraction << ',' << runs[r].occupied_sites << '\n';
  }
  out.csv("coarse_runs.csv", os, truncated);
  if (first) {
    auto ls = csv_stream();
    first->write_csv(ls);
    out.csv("coarse_lattice.csv", ls, false);
  }
  double p_site_min = 1.0, p_bond_min = 1.0;
  double xi_prime = std::numeric_limits<double>::quiet_NaN();
  bool T_truncated = false;
  if (first) {
    for (const auto& bl : first->blocks) p_site_min = std::min(p_site_min, std::exp(bl.log_p_site));
    for (const auto& pr : first->pairs) p_bond_min = std::min(p_bond_min, pr.p_bond);
    xi_prime = first->xi_prime_estimate();
    T_truncated = first->truncated;
  }
  res.summary = {{"L", c.coarse.L},
                 {"tau", c.coarse.tau},
                 {"lambda", c.lambda},
                 {"mode", to_string(c.coarse.mode)},
                 {"extent", c.coarse.extent},
                 {"replicates", n_done},
                 {"crossings", crossings},
                 {"crossing_rate", n_done ? static_cast<double>(crossings) / static_cast<double>(n_done) : 0.0},
                 {"largest_cluster_fraction_first", n_done ? runs[0].largest_cluster_fraction : 0.0},
                 {"p_site_min", p_site_min},
                 {"p_bond_min", p_bond_min},
                 {"xi_prime_estimate", std::isfinite(xi_prime) ? nlohmann::json(xi_prime) : nlohmann::json(nullptr)},
                 {"T_truncated", T_truncated},
                 {"block_scale", scale},
                 {"theta", phase_to_json(theta)}};
  out.json("coarse.json", res.summary);
  res.truncated = truncated;
}

inline void run_recurrence(const ExperimentSpec& s, const RunContext&, Outputs& out, RunResult& res) {
  const auto& r = std::get<RecurrenceParams>(s.params);
  const auto t = build_recurrence_table(*s.sys, r.k_max, r.grid_n);
  std::ostringstream os;
  t.write_csv(os);
  out.csv("recurrence.csv", os, false);
  res.summary = {{"k_max", r.k_max}, {"system", system_to_json(*s.sys)}};
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Runs a validated spec into ctx.out_dir and writes manifest.json last.
/// Returns normally on interrupt with result.truncated set.
inline RunResult run_experiment(const ExperimentSpec& s, const RunContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  RunResult res;
  detail::Outputs out(ctx, res);
  const auto started = detail::utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  switch (s.kind) {
    case ExperimentKind::calibration: detail::run_calibration(s, ctx, out, res); break;
    case ExperimentKind::decay_scan: detail::run_decay(s, ctx, out, res); break;
    case ExperimentKind::lambda_sweep: detail::run_sweep(s, ctx, out, res); break;
    case ExperimentKind::msa_diagnostic: detail::run_msa(s, ctx, out, res); break;
    case ExperimentKind::coarse_order: detail::run_coarse(s, ctx, out, res); break;
    case ExperimentKind::recurrence: detail::run_recurrence(s, ctx, out, res); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest = {{"kind", to_string(s.kind)},
                             {"spec_hash", s.hash},
                             {"spec", s.source},
                             {"seed", s.seed},
                             {"workers", ctx.workers},
                             {"version", kVersion},
                             {"compiler", __VERSION__},
                             {"started_utc", started},
                             {"wall_time_s", wall},
                             {"truncated", res.truncated},
                             {"outputs", res.outputs}};
  out.json("manifest.json", manifest);
  return res;
}

}  // namespace qpfk
