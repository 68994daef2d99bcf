#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/core/lattice.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/percolation/environment.hpp"

namespace qpfk {

/// The cylinder W x [t_lo, t_hi]. Boxes built by `cylinder` are
/// Lambda_L(x) x [t - T, t + T].
struct SpaceTimeBox {
  Region region;
  double t_lo = -1.0;
  double t_hi = 1.0;

  SpaceTimeBox() = default;
  SpaceTimeBox(Region r, double lo, double hi) : region(std::move(r)), t_lo(lo), t_hi(hi) {
    if (!(hi > lo)) throw std::invalid_argument("SpaceTimeBox: empty time window");
  }

  static SpaceTimeBox cylinder(const Site& center, std::int64_t L, double T, double t = 0.0) {
    if (L < 1) throw std::invalid_argument("SpaceTimeBox: L must be >= 1");
    if (!(T > 0) || !std::isfinite(T)) throw std::invalid_argument("SpaceTimeBox: T must be positive and finite");
    return SpaceTimeBox(Region::ball(center, L), t - T, t + T);
  }

  double height() const { return t_hi - t_lo; }
  bool contains(const Site& x, double t) const { return region.contains(x) && t >= t_lo && t <= t_hi; }
  bool on_vertical_boundary(std::size_t site) const { return region.on_boundary(region.site(site)); }
};

struct SpaceTimePoint {
  Site x;
  double t = 0.0;
};

/// Death times per site and bond times per nearest-neighbour edge of the
/// box, indexed like box.region; every list sorted and inside the window.
struct Configuration {
  SpaceTimeBox box;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::vector<double>> deaths;
  std::vector<std::vector<double>> bonds;

  static Configuration empty(const SpaceTimeBox& box) {
    Configuration c;
    c.box = box;
    c.edges = box.region.edges();
    c.deaths.resize(box.region.size());
    c.bonds.resize(c.edges.size());
    return c;
  }

  std::size_t total_deaths() const {
    std::size_t n = 0;
    for (const auto& d : deaths) n += d.size();
    return n;
  }
  std::size_t total_bonds() const {
    std::size_t n = 0;
    for (const auto& b : bonds) n += b.size();
    return n;
  }

  /// Sorted, strictly increasing, inside the window, and no death time
  /// equal to a bond time on an incident edge.
  void validate() const {
    if (deaths.size() != box.region.size() || bonds.size() != edges.size())
      throw std::logic_error("Configuration: list sizes do not match the box");
    auto check = [&](const std::vector<double>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < box.t_lo || v[i] > box.t_hi) throw std::logic_error("Configuration: time outside the window");
        if (i && !(v[i] > v[i - 1])) throw std::logic_error("Configuration: times not strictly increasing");
      }
    };
    for (const auto& d : deaths) check(d);
    for (const auto& b : bonds) check(b);
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (double t : bonds[e])
        for (auto s : {edges[e].first, edges[e].second})
          if (std::binary_search(deaths[s].begin(), deaths[s].end(), t))
            throw std::logic_error("Configuration: death coincides with a bond time");
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.box.region == b.box.region && a.box.t_lo == b.box.t_lo && a.box.t_hi == b.box.t_hi && a.deaths == b.deaths &&
           a.bonds == b.bonds;
  }
};

/// Partial order: a <= b when every bond of a is in b and every death of b is in a.
inline bool config_leq(const Configuration& a, const Configuration& b) {
  for (std::size_t e = 0; e < a.bonds.size(); ++e)
    if (!std::includes(b.bonds[e].begin(), b.bonds[e].end(), a.bonds[e].begin(), a.bonds[e].end())) return false;
  for (std::size_t s = 0; s < a.deaths.size(); ++s)
    if (!std::includes(a.deaths[s].begin(), a.deaths[s].end(), b.deaths[s].begin(), b.deaths[s].end())) return false;
  return true;
}

namespace detail {

struct Marked {
  double t;
  double mark;
};

inline std::vector<Marked> poisson_marked(double rate, double lo, double hi, Rng& rng) {
  std::vector<Marked> out;
  if (rate <= 0) return out;
  const double mean = rate * (hi - lo);
  if (!(mean <= 1e8)) throw std::length_error("Poisson process: expected point count exceeds 1e8");
  std::poisson_distribution<std::uint64_t> count(mean);
  const auto n = count(rng);
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double t = lo + (hi - lo) * uniform01(rng);
    out.push_back({t, uniform01(rng)});
  }
  auto by_time = [](const Marked& a, const Marked& b) { return a.t < b.t; };
  std::sort(out.begin(), out.end(), by_time);
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].t == out[i - 1].t) {  // duplicate time: redraw and start over
      out[i].t = lo + (hi - lo) * uniform01(rng);
      std::sort(out.begin(), out.end(), by_time);
      i = 0;
    }
  return out;
}

inline std::vector<double> rates_on_box(const Environment& env, const SpaceTimeBox& box) {
  std::vector<double> r(box.region.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = env.at(box.region.site(i));
  return r;
}

}  // namespace detail

/// Points of the dominating processes with uniform marks; thinning by the
/// marks yields coupled configurations for any smaller rates.
struct MarkedConfiguration {
  SpaceTimeBox box;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<double> death_rate;  // dominating, per site
  double bond_rate = 0.0;          // dominating
  std::vector<std::vector<detail::Marked>> deaths;
  std::vector<std::vector<detail::Marked>> bonds;

  /// Keeps deaths with mark < delta(x) / death_rate(x) and bonds with
  /// mark < lambda / bond_rate.
  Configuration thin(const std::vector<double>& delta, double lambda) const {
    if (delta.size() != deaths.size()) throw std::invalid_argument("thin: field size mismatch");
    if (lambda > bond_rate * (1 + 1e-15)) throw std::invalid_argument("thin: lambda exceeds the dominating rate");
    Configuration c = Configuration::empty(box);
    for (std::size_t s = 0; s < deaths.size(); ++s) {
      if (delta[s] > death_rate[s] * (1 + 1e-15)) throw std::invalid_argument("thin: delta exceeds the dominating rate");
      const double keep = death_rate[s] > 0 ? delta[s] / death_rate[s] : 0.0;
      for (const auto& p : deaths[s])
        if (p.mark < keep) c.deaths[s].push_back(p.t);
    }
    const double keep = bond_rate > 0 ? lambda / bond_rate : 0.0;
    for (std::size_t e = 0; e < bonds.size(); ++e)
      for (const auto& p : bonds[e])
        if (p.mark < keep) c.bonds[e].push_back(p.t);
    return c;
  }
};

/// Samples dominating marked processes. Death/bond coincidences (a
/// probability-zero event) are removed by redrawing the bond time.
inline MarkedConfiguration sample_marked(const std::vector<double>& death_rate, double bond_rate, const SpaceTimeBox& box, Rng& rng) {
  if (bond_rate < 0) throw std::invalid_argument("sample: negative bond rate");
  for (double r : death_rate)
    if (!(r >= 0)) throw std::invalid_argument("sample: negative death rate");
  MarkedConfiguration m;
  m.box = box;
  m.edges = box.region.edges();
  m.death_rate = death_rate;
  m.bond_rate = bond_rate;
  for (double r : death_rate) m.deaths.push_back(detail::poisson_marked(r, box.t_lo, box.t_hi, rng));
  for (std::size_t e = 0; e < m.edges.size(); ++e) {
    auto pts = detail::poisson_marked(bond_rate, box.t_lo, box.t_hi, rng);
    auto clashes = [&](double t) {
      for (auto s : {m.edges[e].first, m.edges[e].second}) {
        const auto& d = m.deaths[s];
        const auto it = std::lower_bound(d.begin(), d.end(), t, [](const detail::Marked& a, double v) { return a.t < v; });
        if (it != d.end() && it->t == t) return true;
      }
      return false;
    };
    for (auto& p : pts)
      while (clashes(p.t)) p.t = box.t_lo + box.height() * uniform01(rng);
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    m.bonds.push_back(std::move(pts));
  }
  return m;
}

/// Deaths at rate delta(x) and bonds at rate lambda, independent across
/// lines, deterministic given the stream.
inline Configuration sample_configuration(const Environment& env, const SpaceTimeBox& box, Rng& rng) {
  const auto rates = detail::rates_on_box(env, box);
  auto m = sample_marked(rates, env.lambda, box, rng);
  return m.thin(rates, env.lambda);
}

/// Configurations lo <= hi from shared drivers. Requires lambda_hi >= lambda_lo
/// and delta_hi <= delta_lo on the box (q = 1 for both).
inline std::pair<Configuration, Configuration> monotone_coupled_pair(const Environment& env_lo, const Environment& env_hi,
                                                                     const SpaceTimeBox& box, std::uint64_t seed) {
  if (env_lo.q != 1.0 || env_hi.q != 1.0) throw std::invalid_argument("monotone_coupled_pair: requires q = 1");
  if (env_hi.lambda < env_lo.lambda) throw std::invalid_argument("monotone_coupled_pair: ordering violated, lambda_hi < lambda_lo");
  const auto d_lo = detail::rates_on_box(env_lo, box), d_hi = detail::rates_on_box(env_hi, box);
  for (std::size_t i = 0; i < d_lo.size(); ++i)
    if (d_hi[i] > d_lo[i])
      throw std::invalid_argument("monotone_coupled_pair: ordering violated, delta_hi > delta_lo at " + box.region.site(i).to_string());
  Rng rng(seed);
  const auto m = sample_marked(d_lo, env_hi.lambda, box, rng);
  return {m.thin(d_lo, env_lo.lambda), m.thin(d_hi, env_hi.lambda)};
}

// ---- debug JSON ----------------------------------------------------------

inline nlohmann::json site_to_json(const Site& s) {
  return std::vector<std::int64_t>(s.c.begin(), s.c.begin() + s.dim);
}

inline Site site_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<std::int64_t>>();
  if (v.empty() || v.size() > kMaxLatticeDim) throw std::invalid_argument("site_from_json: bad dimension");
  Site s = Site::origin(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) s[static_cast<int>(i)] = v[i];
  return s;
}

inline nlohmann::json config_to_json(const Configuration& c) {
  nlohmann::json j;
  j["box"] = {{"lo", site_to_json(c.box.region.lo())}, {"hi", site_to_json(c.box.region.hi())}, {"t_lo", c.box.t_lo}, {"t_hi", c.box.t_hi}};
  j["deaths"] = c.deaths;
  j["bonds"] = c.bonds;
  j["edges"] = c.edges;
  return j;
}

inline Configuration config_from_json(const nlohmann::json& j) {
  const auto& b = j.at("box");
  SpaceTimeBox box(Region(site_from_json(b.at("lo")), site_from_json(b.at("hi"))), b.at("t_lo").get<double>(), b.at("t_hi").get<double>());
  Configuration c = Configuration::empty(box);
  c.deaths = j.at("deaths").get<std::vector<std::vector<double>>>();
  c.bonds = j.at("bonds").get<std::vector<std::vector<double>>>();
  if (j.at("edges").get<std::vector<std::pair<std::uint32_t, std::uint32_t>>>() != c.edges)
    throw std::invalid_argument("config_from_json: edge list does not match the box");
  c.validate();
  return c;
}

}  // namespace qpfk
