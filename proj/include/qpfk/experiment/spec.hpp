#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/coarse/coarse.hpp"
#include "qpfk/core/schema.hpp"
#include "qpfk/multiscale/diagnostics.hpp"
#include "qpfk/multiscale/exponents.hpp"
#include "qpfk/random_cluster/rcm.hpp"
#include "qpfk/sampling/descriptor.hpp"

namespace qpfk {

enum class ExperimentKind { calibration, decay_scan, lambda_sweep, msa_diagnostic, coarse_order, recurrence };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::calibration: return "calibration";
    case ExperimentKind::decay_scan: return "decay_scan";
    case ExperimentKind::lambda_sweep: return "lambda_sweep";
    case ExperimentKind::msa_diagnostic: return "msa_diagnostic";
    case ExperimentKind::coarse_order: return "coarse_order";
    default: return "recurrence";
  }
}

inline std::optional<ExperimentKind> kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::calibration, ExperimentKind::decay_scan, ExperimentKind::lambda_sweep, ExperimentKind::msa_diagnostic,
                 ExperimentKind::coarse_order, ExperimentKind::recurrence})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Hash of the canonical serialisation (sorted keys, no whitespace).
inline std::string spec_hash(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

/// A fixed phase, or the index-th Haar draw from the master seed.
struct ThetaChoice {
  std::optional<Phase> fixed;
  std::uint64_t index = 0;
  std::uint64_t tries = 1;  // consecutive draws tried when a lambda search fails

  Phase draw(const DynamicalSystem& sys, std::uint64_t seed, std::uint64_t i) const {
    if (fixed) return *fixed;
    Rng rng(derive_seed(seed, i));
    return sys.sample_phase(rng);
  }
};

/// lambda given outright or found by initial_lambda_search.
struct LambdaChoice {
  std::optional<double> value;
  double m1 = 0.25;
  std::int64_t L1 = 8;
  double tol = 0.05;
  std::uint64_t n_samples = 20000;
};

struct CalibrationParams {
  double delta = 1.0, lambda = 1.0, T = 1.0, t = 0.7;
  std::uint64_t n_samples = 100000;
  double z = 3.0;  // pass when |estimate - expected| <= z Wilson sigma
};

struct DecayParams {
  LambdaChoice lambda;
  std::vector<std::int64_t> Ls{8, 16, 32};
  double nu = 0.9;
  MsaBudget budget;
  DecayOptions options;
};

struct SweepParams {
  std::optional<double> delta;  // constant field; otherwise h(T^x theta)
  std::vector<double> lambdas;
  std::vector<ProxyBox> boxes{{4, 2.0}};
  double q = 1.0;
  std::uint64_t n_samples = 20000;
  McParams mc;
  double threshold = 0.5;
};

struct MsaParams {
  LambdaChoice lambda;
  MsaExponents exponents;
  std::int64_t L0 = 8;
  double m0 = 0.25;
  int k_max = 2;
  MsaDiagnosticBudget budget;
};

struct CoarseOrderParams {
  double lambda = 1.0;
  CoarseParams coarse;
  bool auto_L = true;
  double target = 0.9;
  std::int64_t L_max = 5000;
  std::uint64_t replicates = 100;
};

struct RecurrenceParams {
  int k_max = 10000;
  std::size_t grid_n = 256;
};

/// A validated experiment: every field is checked before anything runs.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::calibration;
  nlohmann::json source;
  std::string hash;
  std::uint64_t seed = 1;
  std::optional<DynamicalSystem> sys;
  std::optional<SamplingFunction> h;
  ThetaChoice theta;
  std::variant<CalibrationParams, DecayParams, SweepParams, MsaParams, CoarseOrderParams, RecurrenceParams> params;
};

namespace detail {

template <class T>
T get_positive(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  const T v = schema::get_or<T>(j, key, path, fallback);
  if (!(v > 0)) throw SchemaError(schema::join(path, key), "must be positive");
  return v;
}

inline std::vector<std::int64_t> scales_from_json(const nlohmann::json& j, const std::string& key, const std::string& path,
                                                  std::vector<std::int64_t> fallback) {
  auto v = schema::get_or(j, key, path, fallback);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < 1) throw SchemaError(schema::join(schema::join(path, key), i), "must be >= 1");
  return v;
}

inline LambdaChoice lambda_from_json(const nlohmann::json& j, const std::string& path) {
  LambdaChoice c;
  if (!j.contains("lambda")) throw SchemaError(schema::join(path, "lambda"), "missing required field");
  const auto& v = j["lambda"];
  const auto p = schema::join(path, "lambda");
  if (v.is_number()) {
    c.value = v.get<double>();
    if (!(*c.value > 0)) throw SchemaError(p, "must be positive");
    return c;
  }
  if (!v.is_object()) throw SchemaError(p, "expected a number or a search object");
  const auto& s = schema::at(v, "search", p);
  const auto sp = schema::join(p, "search");
  c.m1 = get_positive(s, "m1", sp, c.m1);
  c.L1 = get_positive<std::int64_t>(s, "L1", sp, c.L1);
  c.tol = get_positive(s, "tol", sp, c.tol);
  c.n_samples = get_positive<std::uint64_t>(s, "n_samples", sp, c.n_samples);
  return c;
}

inline MsaBudget budget_from_json(const nlohmann::json& j, const std::string& path, MsaBudget b) {
  if (!j.contains("budget")) return b;
  const auto& v = j["budget"];
  const auto p = schema::join(path, "budget");
  b.n_samples = get_positive<std::uint64_t>(v, "n_samples", p, b.n_samples);
  b.z = get_positive(v, "z", p, b.z);
  b.T_log_cap = get_positive(v, "T_log_cap", p, b.T_log_cap);
  return b;
}

inline McParams mc_from_json(const nlohmann::json& j, const std::string& path, McParams m) {
  if (!j.contains("mc")) return m;
  const auto& v = j["mc"];
  const auto p = schema::join(path, "mc");
  m.n_sweeps = get_positive<std::uint64_t>(v, "n_sweeps", p, m.n_sweeps);
  m.burn_in = schema::get_or<std::uint64_t>(v, "burn_in", p, m.burn_in);
  m.thinning = get_positive<std::uint64_t>(v, "thinning", p, m.thinning);
  m.n_chains = get_positive<std::uint32_t>(v, "n_chains", p, m.n_chains);
  m.rhat_threshold = get_positive(v, "rhat_threshold", p, m.rhat_threshold);
  return m;
}

inline void require_dynamics(const ExperimentSpec& s, const std::string& what) {
  if (!s.sys) throw SchemaError("system", "missing required field for " + what);
  if (!s.h) throw SchemaError("sampling", "missing required field for " + what);
}

}  // namespace detail

/// Parses and validates a spec. The kind comes from "kind" or, when the
/// spec omits it, from `default_kind`; a seed given on the command line
/// replaces "seed".
inline ExperimentSpec parse_spec(const nlohmann::json& j, std::optional<ExperimentKind> default_kind = std::nullopt,
                                 std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "spec must be a JSON object");
  ExperimentSpec s;
  s.source = j;
  s.hash = spec_hash(j);
  if (j.contains("kind")) {
    const auto name = schema::get<std::string>(j, "kind", "");
    const auto k = kind_from_string(name);
    if (!k) throw SchemaError("kind", "unknown experiment kind '" + name + "'");
    if (default_kind && *k != *default_kind)
      throw SchemaError("kind", "spec is '" + name + "' but the command runs '" + to_string(*default_kind) + "'");
    s.kind = *k;
  } else if (default_kind) {
    s.kind = *default_kind;
  } else {
    throw SchemaError("kind", "missing required field");
  }
  s.seed = seed_override ? *seed_override : schema::get_or<std::uint64_t>(j, "seed", "", 1);

  if (j.contains("system")) s.sys = system_from_json(j["system"], "system");
  if (j.contains("sampling")) {
    if (!s.sys) throw SchemaError("system", "required when a sampling function is given");
    s.h = sampling_from_json(j["sampling"], *s.sys, "sampling");
  }
  if (j.contains("theta")) {
    const auto& t = j["theta"];
    if (!s.sys) throw SchemaError("system", "required when theta is given");
    if (t.is_object()) {
      s.theta.index = schema::get_or<std::uint64_t>(t, "random", "theta", 0);
      s.theta.tries = get_positive<std::uint64_t>(t, "tries", "theta", 1);
    } else {
      s.theta.fixed = phase_from_json(t, s.sys->phase_dim(), "theta");
    }
  }

  const nlohmann::json empty = nlohmann::json::object();
  const auto& p = j.contains("params") ? j["params"] : empty;
  const std::string pp = "params";
  switch (s.kind) {
    case ExperimentKind::calibration: {
      CalibrationParams c;
      c.delta = get_positive(p, "delta", pp, c.delta);
      c.lambda = get_positive(p, "lambda", pp, c.lambda);
      c.T = get_positive(p, "T", pp, c.T);
      c.t = get_positive(p, "t", pp, c.t);
      if (!(c.t <= c.T)) throw SchemaError("params.t", "must not exceed T");
      c.n_samples = get_positive<std::uint64_t>(p, "n_samples", pp, c.n_samples);
      c.z = get_positive(p, "z", pp, c.z);
      s.params = c;
      break;
    }
    case ExperimentKind::decay_scan: {
      require_dynamics(s, "decay_scan");
      DecayParams d;
      d.lambda = lambda_from_json(p, pp);
      d.Ls = scales_from_json(p, "Ls", pp, d.Ls);
      d.nu = get_positive(p, "nu", pp, d.nu);
      d.budget = budget_from_json(p, pp, d.budget);
      const auto method = schema::get_or<std::string>(p, "method", pp, "splitting");
      if (method == "direct") d.options.method = DecayEstimator::direct;
      else if (method != "splitting") throw SchemaError("params.method", "expected 'direct' or 'splitting'");
      d.options.per_level = get_positive<std::uint64_t>(p, "per_level", pp, d.options.per_level);
      d.options.replicas = get_positive<std::uint64_t>(p, "replicas", pp, d.options.replicas);
      if (d.options.replicas < 2) throw SchemaError("params.replicas", "must be >= 2");
      s.params = d;
      break;
    }
    case ExperimentKind::lambda_sweep: {
      SweepParams w;
      if (p.contains("delta")) w.delta = schema::non_negative(schema::get<double>(p, "delta", pp), "params.delta");
      else require_dynamics(s, "lambda_sweep without a constant delta");
      w.lambdas = schema::get_or(p, "lambdas", pp, w.lambdas);
      for (std::size_t i = 0; i < w.lambdas.size(); ++i) {
        if (!(w.lambdas[i] >= 0)) throw SchemaError(schema::join("params.lambdas", i), "must be non-negative");
        if (i && w.lambdas[i] < w.lambdas[i - 1]) throw SchemaError(schema::join("params.lambdas", i), "grid must be sorted ascending");
      }
      if (p.contains("boxes")) {
        const auto& b = p["boxes"];
        if (!b.is_array()) throw SchemaError("params.boxes", "expected a list of {L, T}");
        w.boxes.clear();
        for (std::size_t i = 0; i < b.size(); ++i) {
          const auto bp = schema::join("params.boxes", i);
          w.boxes.push_back({get_positive<std::int64_t>(b[i], "L", bp, 0), get_positive(b[i], "T", bp, 0.0)});
          if (i && w.boxes[i].L < w.boxes[i - 1].L) throw SchemaError(bp, "boxes must increase");
        }
      }
      w.q = schema::get_or(p, "q", pp, w.q);
      if (!(w.q >= 1)) throw SchemaError("params.q", "must be >= 1");
      w.n_samples = get_positive<std::uint64_t>(p, "n_samples", pp, w.n_samples);
      w.mc = mc_from_json(p, pp, w.mc);
      w.threshold = get_positive(p, "threshold", pp, w.threshold);
      s.params = w;
      break;
    }
    case ExperimentKind::msa_diagnostic: {
      require_dynamics(s, "msa_diagnostic");
      MsaParams m;
      m.lambda = lambda_from_json(p, pp);
      const int d = s.sys->lattice_dim();
      if (p.contains("exponents")) {
        const auto& e = p["exponents"];
        const std::string ep = "params.exponents";
        m.exponents = {d,
                       schema::get<double>(e, "xi", ep),
                       schema::get<double>(e, "nu", ep),
                       schema::get<double>(e, "alpha", ep),
                       schema::get<double>(e, "gamma", ep),
                       schema::get<double>(e, "kappa", ep),
                       schema::get<double>(e, "tau", ep)};
        if (auto bad = verify_exponents(m.exponents)) throw SchemaError(ep, "constraint " + *bad + " violated");
      } else {
        try {
          m.exponents = feasible_exponents(d, schema::get<double>(p, "xi", pp), schema::get<double>(p, "nu", pp));
        } catch (const InfeasibleExponents& e) {
          throw SchemaError(pp, e.what());
        }
      }
      m.L0 = get_positive<std::int64_t>(p, "L0", pp, m.L0);
      if (m.L0 < 2) throw SchemaError("params.L0", "must be >= 2");
      m.m0 = get_positive(p, "m0", pp, m.m0);
      m.k_max = schema::get_or(p, "k_max", pp, m.k_max);
      if (m.k_max < 0) throw SchemaError("params.k_max", "must be >= 0");
      m.budget.mc = budget_from_json(p, pp, m.budget.mc);
      m.budget.n_theta = get_positive<std::uint64_t>(p, "n_theta", pp, m.budget.n_theta);
      m.budget.audit_half_width = get_positive<std::int64_t>(p, "audit_half_width", pp, m.budget.audit_half_width);
      m.budget.max_window_scan = get_positive<std::int64_t>(p, "max_window_scan", pp, m.budget.max_window_scan);
      m.budget.xi_prime = schema::non_negative(schema::get_or(p, "xi_prime", pp, 0.0), "params.xi_prime");
      const auto dec = schema::get_or<std::string>(p, "decrement", pp, "tau");
      if (dec == "kappa") m.budget.decrement = MassDecrement::kappa;
      else if (dec != "tau") throw SchemaError("params.decrement", "expected 'tau' or 'kappa'");
      s.params = m;
      break;
    }
    case ExperimentKind::coarse_order: {
      require_dynamics(s, "coarse_order");
      CoarseOrderParams c;
      c.lambda = get_positive(p, "lambda", pp, c.lambda);
      c.coarse.tau = get_positive(p, "tau", pp, c.coarse.tau);
      const int d = s.sys->lattice_dim();
      c.coarse.extent = scales_from_json(p, "extent", pp, std::vector<std::int64_t>(static_cast<std::size_t>(d + 1), 20));
      if (static_cast<int>(c.coarse.extent.size()) != d + 1) throw SchemaError("params.extent", "needs d + 1 entries");
      if (p.contains("L") && p["L"].is_number_integer()) {
        c.auto_L = false;
        c.coarse.L = get_positive<std::int64_t>(p, "L", pp, 1);
      } else if (p.contains("L") && p["L"] != "auto") {
        throw SchemaError("params.L", "expected a positive integer or 'auto'");
      }
      c.target = get_positive(p, "target", pp, c.target);
      if (!(c.target < 1)) throw SchemaError("params.target", "must be below 1");
      c.L_max = get_positive<std::int64_t>(p, "L_max", pp, c.L_max);
      const auto mode = schema::get_or<std::string>(p, "mode", pp, "formula");
      if (mode == "empirical") c.coarse.mode = CoarseMode::empirical;
      else if (mode == "coupled") c.coarse.mode = CoarseMode::coupled;
      else if (mode != "formula") throw SchemaError("params.mode", "expected 'formula', 'empirical' or 'coupled'");
      c.coarse.T_log_cap = get_positive(p, "T_log_cap", pp, c.coarse.T_log_cap);
      c.coarse.n_mc = get_positive<std::uint64_t>(p, "n_mc", pp, c.coarse.n_mc);
      c.replicates = get_positive<std::uint64_t>(p, "replicates", pp, c.replicates);
      s.params = c;
      break;
    }
    case ExperimentKind::recurrence: {
      if (!s.sys) throw SchemaError("system", "missing required field for recurrence");
      RecurrenceParams r;
      r.k_max = get_positive(p, "k_max", pp, r.k_max);
      r.grid_n = get_positive<std::size_t>(p, "grid_n", pp, r.grid_n);
      s.params = r;
      break;
    }
  }
  return s;
}

}  // namespace qpfk
