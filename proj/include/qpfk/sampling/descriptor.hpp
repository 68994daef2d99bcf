#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/core/schema.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/sampling/sampling_function.hpp"
#include "qpfk/sampling/transversality.hpp"

namespace qpfk {

// ---- dynamical systems -------------------------------------------------

inline Frequency frequency_from_json(const nlohmann::json& j, const std::string& path) {
  try {
    if (j.is_string()) return Frequency::parse(j.get<std::string>());
    if (j.is_array()) return Frequency(j.get<std::vector<std::uint64_t>>());
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(path, e.what());
  }
  throw SchemaError(path, "expected a preset name or a list of partial quotients");
}

/// {"kind": "rotation" | "skew_shift", "frequency": ...} or
/// {"kind": "torus_rotation", "n": N, "d": D, "matrix": [...]}.
inline DynamicalSystem system_from_json(const nlohmann::json& j, const std::string& path = "system") {
  const auto kind = schema::get<std::string>(j, "kind", path);
  try {
    if (kind == "rotation") return DynamicalSystem::rotation(frequency_from_json(schema::at(j, "frequency", path), schema::join(path, "frequency")));
    if (kind == "skew_shift") return DynamicalSystem::skew_shift(frequency_from_json(schema::at(j, "frequency", path), schema::join(path, "frequency")));
    if (kind == "torus_rotation")
      return DynamicalSystem::torus_rotation(schema::get<int>(j, "n", path), schema::get<int>(j, "d", path),
                                             schema::get<std::vector<double>>(j, "matrix", path));
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(path, e.what());
  }
  throw SchemaError(schema::join(path, "kind"), "unknown system kind '" + kind + "'");
}

inline nlohmann::json system_to_json(const DynamicalSystem& sys) {
  nlohmann::json j;
  if (sys.kind() == DynamicalSystem::Kind::skew_shift || sys.is_circle_rotation()) {
    j["kind"] = sys.kind() == DynamicalSystem::Kind::skew_shift ? "skew_shift" : "rotation";
    const auto a = sys.frequency()->partial_quotients();
    j["frequency"] = std::vector<std::uint64_t>(a.begin(), a.end());
    return j;
  }
  j["kind"] = "torus_rotation";
  j["n"] = sys.phase_dim();
  j["d"] = sys.lattice_dim();
  std::vector<double> m;
  for (int i = 0; i < sys.phase_dim(); ++i)
    for (int k = 0; k < sys.lattice_dim(); ++k) m.push_back(to_turns(sys.matrix(i, k)));
  j["matrix"] = m;
  return j;
}

// ---- sampling functions ------------------------------------------------

inline Phase phase_from_json(const nlohmann::json& j, int dim, const std::string& path) {
  if (j.is_number()) {
    if (dim != 1) throw SchemaError(path, "expected " + std::to_string(dim) + " coordinates");
    return Phase::from_turns({j.get<double>()});
  }
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw SchemaError(path, "expected " + std::to_string(dim) + " coordinates");
  Phase p(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw SchemaError(schema::join(path, static_cast<std::size_t>(i)), "expected a number");
    p[i] = angle_from_turns(j[static_cast<std::size_t>(i)].get<double>());
  }
  return p;
}

inline nlohmann::json phase_to_json(const Phase& p) {
  if (p.dim == 1) return to_turns(p[0]);
  auto a = nlohmann::json::array();
  for (int i = 0; i < p.dim; ++i) a.push_back(to_turns(p[i]));
  return a;
}

/// Builds a sampling function from its descriptor:
///   {"kind": "psi_F", "zeros": [...], "xi": x}
///   {"kind": "stretched", "zeros": [...], "xi": x', "r0", "r1", "h_max"}
///   {"kind": "custom_table", "zeros": [...], "r": [...], "h": [...]}
///   {"kind": "h_eps", "base": {...}, "theta0": i, "eps": e, "a": a,
///    and either "levels"/"ratio" or explicit "eta"/"etas"/"L"}
/// plus an optional positive "scale".
inline SamplingFunction sampling_from_json(const nlohmann::json& j, const DynamicalSystem& sys,
                                           const std::string& path = "sampling") {
  const auto kind = schema::get<std::string>(j, "kind", path);
  const int n = sys.phase_dim();
  auto zeros = [&] {
    const auto& z = schema::at(j, "zeros", path);
    const auto zp = schema::join(path, "zeros");
    if (!z.is_array() || z.empty()) throw SchemaError(zp, "expected a nonempty list of phases");
    std::vector<Phase> out;
    for (std::size_t i = 0; i < z.size(); ++i) out.push_back(phase_from_json(z[i], n, schema::join(zp, i)));
    return out;
  };
  auto wrap = [&](auto&& build) -> SamplingFunction {
    try {
      SamplingFunction h = build();
      if (j.contains("scale")) h = h.scaled(schema::positive(schema::get<double>(j, "scale", path), schema::join(path, "scale")));
      return h;
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaError(path, e.what());
    }
  };

  if (kind == "psi_F")
    return wrap([&] { return make_psi_F(zeros(), schema::get<double>(j, "xi", path), sys); });
  if (kind == "stretched")
    return wrap([&] {
      return make_stretched(zeros(), schema::get<double>(j, "xi", path), schema::get_or(j, "h_max", path, 1.0),
                            schema::get_or(j, "r0", path, 0.2), schema::get_or(j, "r1", path, 0.25));
    });
  if (kind == "custom_table")
    return wrap([&] {
      return SamplingFunction(zeros(), TableProfile{schema::get<std::vector<double>>(j, "r", path),
                                                    schema::get<std::vector<double>>(j, "h", path)});
    });
  if (kind == "h_eps") {
    const SamplingFunction base = sampling_from_json(schema::at(j, "base", path), sys, schema::join(path, "base"));
    const auto i0 = schema::get_or<std::size_t>(j, "theta0", path, 0);
    if (i0 >= base.zeros().size()) throw SchemaError(schema::join(path, "theta0"), "zero index out of range");
    const Phase theta0 = base.zeros()[i0];
    const double a = schema::get<double>(j, "a", path);
    if (j.contains("etas"))
      return wrap([&] {
        return make_h_eps(base, theta0, a, schema::get<double>(j, "eta", path), schema::get<std::vector<double>>(j, "etas", path),
                          schema::get<std::vector<double>>(j, "L", path));
      });
    return wrap([&] {
      return make_h_eps(base, sys, theta0, schema::positive(schema::get<double>(j, "eps", path), schema::join(path, "eps")), a,
                        schema::get_or<std::size_t>(j, "levels", path, 6), schema::get_or(j, "ratio", path, 0.5));
    });
  }
  throw SchemaError(schema::join(path, "kind"), "unknown sampling kind '" + kind + "'");
}

/// Descriptor that rebuilds the same function; h_eps records its radii
/// and covering lengths explicitly.
inline nlohmann::json sampling_to_json(const SamplingFunction& h) {
  nlohmann::json j;
  auto zs = nlohmann::json::array();
  for (const auto& z : h.zeros()) zs.push_back(phase_to_json(z));
  j["zeros"] = zs;
  std::visit([&](const auto& p) {
    using P = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<P, PsiFProfile>) {
      j["kind"] = "psi_F";
      j["xi"] = p.xi;
    } else if constexpr (std::is_same_v<P, StretchedProfile>) {
      j["kind"] = "stretched";
      j["xi"] = p.xi_prime;
      j["r0"] = p.r0;
      j["r1"] = p.r1;
      j["h_max"] = p.h_max;
    } else {
      j["kind"] = "custom_table";
      j["r"] = p.r;
      j["h"] = p.h;
    }
  }, h.profile());
  if (h.log_scale() != 0.0) j["scale"] = std::exp(h.log_scale());
  for (const auto& dp : h.deepenings()) {
    nlohmann::json outer;
    outer["kind"] = "h_eps";
    outer["base"] = j;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < h.zeros().size(); ++i)
      if (h.zeros()[i] == dp.theta0) idx = i;
    outer["theta0"] = idx;
    outer["a"] = dp.a;
    outer["eta"] = dp.eta;
    outer["etas"] = dp.etas;
    outer["L"] = dp.lengths;
    j = std::move(outer);
  }
  return j;
}

}  // namespace qpfk
