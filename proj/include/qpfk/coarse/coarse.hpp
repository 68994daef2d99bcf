#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpfk/core/disjoint_set.hpp"
#include "qpfk/core/lattice.hpp"
#include "qpfk/core/parallel.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/core/stats.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/percolation/clusters.hpp"
#include "qpfk/percolation/configuration.hpp"
#include "qpfk/percolation/environment.hpp"
#include "qpfk/percolation/estimate.hpp"
#include "qpfk/sampling/sampling_function.hpp"

namespace qpfk {

/// log P(no death on a line of rate delta over height T) = -exp(log delta + log T).
inline double log_site_occupation_prob(double log_delta_min, double T_log) {
  if (log_delta_min == -std::numeric_limits<double>::infinity()) return 0.0;
  return -std::exp(log_delta_min + T_log);
}

inline double site_occupation_prob(double log_delta_min, double T_log) {
  return std::exp(log_site_occupation_prob(log_delta_min, T_log));
}

/// Per-slice lower bound (1 - e^{-lambda})^{5dL} e^{-h_max 5dL} = exp(-c L).
struct SliceBound {
  double log_p = 0;
  double c = 0;
};

inline SliceBound slice_bond_prob_bound(std::int64_t L, int d, double lambda, double h_max) {
  if (L < 1 || d < 1 || !(lambda > 0) || !(h_max >= 0)) throw std::invalid_argument("slice_bond_prob_bound: need L, d, lambda > 0 and h_max >= 0");
  const double n = 5.0 * d * static_cast<double>(L);
  SliceBound b;
  b.log_p = n * (std::log(-std::expm1(-lambda)) - h_max);
  b.c = -b.log_p / static_cast<double>(L);
  return b;
}

/// 1 - (1 - s)^T with s = exp(log_s) and T = exp(T_log), stable for tiny s
/// and huge T.
inline double bond_occupation_bound_log(double log_s, double T_log) {
  if (log_s == -std::numeric_limits<double>::infinity()) return 0.0;
  if (log_s > 0) throw std::invalid_argument("bond_occupation_bound: slice probability above 1");
  if (log_s == 0) return 1.0;
  // a = -log(1 - s); for s < 1e-8, log a = log s to double precision
  const double log_a = log_s < -18.42 ? log_s : std::log(-std::log1p(-std::exp(log_s)));
  const double y = std::exp(T_log + log_a);
  return -std::expm1(-y);
}

inline double bond_occupation_bound(double s, double T) {
  if (!(s >= 0 && s <= 1) || !(T >= 1)) throw std::invalid_argument("bond_occupation_bound: need s in [0, 1] and T >= 1");
  if (s == 0) return 0.0;
  if (s == 1) return 1.0;
  return -std::expm1(T * std::log1p(-s));
}

/// Lambda_L(x~) = { y : |y - (2L + 1) x~|_inf <= L }.
inline Region coarse_block(const Site& coarse, std::int64_t L) {
  Site c = coarse;
  for (int i = 0; i < c.dim; ++i) c[i] *= 2 * L + 1;
  return Region::closed_ball(c, L);
}

/// Lexicographically first minimiser of log delta over a block.
struct BlockMin {
  Site u;
  double log_delta;
};

inline BlockMin block_minimizer(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, const Region& block) {
  BlockMin m{block.site(0), std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < block.size(); ++i) {
    const Site y = block.site(i);
    const double v = h.log_eval(sys.orbit_point(theta, y));
    if (v < m.log_delta) m = {y, v};
  }
  return m;
}

enum class CoarseMode { formula, empirical, coupled };

inline const char* to_string(CoarseMode m) {
  switch (m) {
    case CoarseMode::formula: return "formula";
    case CoarseMode::empirical: return "empirical";
    default: return "coupled";
  }
}

struct CoarseParams {
  std::int64_t L = 4;
  double tau = 1.2;
  std::vector<std::int64_t> extent;  // d spatial extents, then the time extent
  CoarseMode mode = CoarseMode::formula;
  double T_log_cap = 6.0;            // empirical and coupled modes truncate T at exp(cap)
  std::uint64_t n_mc = 2000;         // empirical mode: slices simulated per pair
};

/// Bond-site percolation on the coarse lattice {0..n_1-1} x ... x {0..n_{d+1}-1}.
/// Coarse site (b, k) is spatial block b at time layer k, index k * blocks + b.
struct CoarseLattice {
  struct Block {
    Site coarse;  // spatial coarse coordinates
    Site u;       // minimiser of delta over the block
    double log_delta = 0;
    double log_p_site = 0;
  };
  struct Pair {
    std::uint32_t a, b;           // block indices
    double log_p_slice = 0;       // formula bound or empirical estimate
    double slice_se = 0;          // empirical standard error (0 for the formula)
    double p_bond = 0;            // 1 - (1 - p_slice)^T
  };

  int d = 1;
  std::int64_t L = 0;
  double tau = 0, T_log = 0;
  bool truncated = false;
  CoarseMode mode = CoarseMode::formula;
  std::vector<std::int64_t> extent;
  double slice_log_bound = 0;
  std::vector<Block> blocks;
  std::vector<Pair> pairs;
  std::vector<char> site_open;   // per coarse site
  std::vector<char> space_open;  // per (layer, pair): layer * pairs + p
  std::vector<char> time_open;   // per (layer, block) between layer and layer + 1

  std::size_t num_blocks() const { return blocks.size(); }
  std::int64_t layers() const { return extent.back(); }
  std::size_t num_sites() const { return blocks.size() * static_cast<std::size_t>(layers()); }

  /// Deepest-zero exponent min_b log|log delta(u_b)| / log L, NaN when some
  /// block has delta(u) >= 1 or L = 1.
  double xi_prime_estimate() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
      if (!(b.log_delta < 0) || L < 2) return std::numeric_limits<double>::quiet_NaN();
      m = std::min(m, std::log(-b.log_delta) / std::log(static_cast<double>(L)));
    }
    return m;
  }

  void write_csv(std::ostream& os) const {
    os << "layer,coarse,u,log_delta_u,site_prob,occupied\n";
    os << std::setprecision(17);
    for (std::int64_t k = 0; k < layers(); ++k)
      for (std::size_t b = 0; b < blocks.size(); ++b)
        os << k << ",\"" << blocks[b].coarse.to_string() << "\",\"" << blocks[b].u.to_string() << "\"," << blocks[b].log_delta << ','
           << std::exp(blocks[b].log_p_site) << ',' << int(site_open[static_cast<std::size_t>(k) * blocks.size() + b]) << '\n';
  }
};

namespace detail {

/// The configuration seen inside a sub-box: deaths of its sites and bonds
/// of edges with both ends in it, clipped to [lo, hi].
inline Configuration restrict_configuration(const Configuration& c, const Region& sub, double lo, double hi) {
  Configuration r = Configuration::empty(SpaceTimeBox(sub, lo, hi));
  auto clip = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (auto it = std::upper_bound(v.begin(), v.end(), lo); it != v.end() && *it < hi; ++it) out.push_back(*it);
  };
  std::unordered_map<std::uint64_t, std::size_t> edge_of;
  for (std::size_t e = 0; e < c.edges.size(); ++e)
    edge_of[(static_cast<std::uint64_t>(c.edges[e].first) << 32) | c.edges[e].second] = e;
  for (std::size_t i = 0; i < sub.size(); ++i) clip(c.deaths[c.box.region.index(sub.site(i))], r.deaths[i]);
  for (std::size_t e = 0; e < r.edges.size(); ++e) {
    const auto a = static_cast<std::uint32_t>(c.box.region.index(sub.site(r.edges[e].first)));
    const auto b = static_cast<std::uint32_t>(c.box.region.index(sub.site(r.edges[e].second)));
    const auto it = edge_of.find((static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b));
    if (it == edge_of.end()) throw std::logic_error("restrict_configuration: sub-box edge missing from the box");
    clip(c.bonds[it->second], r.bonds[e]);
  }
  return r;
}

inline Region union_region(const Region& a, const Region& b) {
  Site lo = a.lo(), hi = a.hi();
  for (int i = 0; i < lo.dim; ++i) {
    lo[i] = std::min(lo[i], b.lo()[i]);
    hi[i] = std::max(hi[i], b.hi()[i]);
  }
  return Region(lo, hi);
}

}  // namespace detail

/// Builds the coarse lattice. Formula mode: site probabilities exp(-delta(u) T)
/// and bond probabilities from the slice bound, sampled independently.
/// Empirical mode: the slice probability of each pair is estimated by
/// simulation, then used in the same way. Coupled mode: one continuum
/// configuration on the whole region decides every site and bond. In the
/// last two modes T is truncated at exp(T_log_cap) and flagged.
inline CoarseLattice build_coarse_lattice(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double lambda,
                                          const CoarseParams& p, std::uint64_t seed, unsigned workers = 1) {
  const int d = sys.lattice_dim();
  if (static_cast<int>(p.extent.size()) != d + 1) throw std::invalid_argument("coarse lattice: extent needs d + 1 entries");
  for (auto n : p.extent)
    if (n < 1) throw std::invalid_argument("coarse lattice: extents must be >= 1");
  if (p.L < 1 || !(p.tau > 0) || !(lambda > 0)) throw std::invalid_argument("coarse lattice: need L >= 1, tau > 0, lambda > 0");
  CoarseLattice g;
  g.d = d;
  g.L = p.L;
  g.tau = p.tau;
  g.mode = p.mode;
  g.extent = p.extent;
  g.T_log = std::pow(static_cast<double>(p.L), p.tau);
  if (p.mode != CoarseMode::formula && g.T_log > p.T_log_cap) {
    g.T_log = p.T_log_cap;
    g.truncated = true;
  }
  g.slice_log_bound = slice_bond_prob_bound(p.L, d, lambda, h.sup_norm()).log_p;

  Site lo = Site::origin(d), hi = Site::origin(d);
  for (int i = 0; i < d; ++i) hi[i] = p.extent[static_cast<std::size_t>(i)] - 1;
  const Region coarse(lo, hi);
  g.blocks.resize(coarse.size());
  parallel_for(coarse.size(), workers, [&](std::size_t b) {
    const auto m = block_minimizer(h, sys, theta, coarse_block(coarse.site(b), p.L));
    g.blocks[b] = {coarse.site(b), m.u, m.log_delta, log_site_occupation_prob(m.log_delta, g.T_log)};
  });
  for (const auto& [a, b] : coarse.edges()) g.pairs.push_back({a, b, g.slice_log_bound, 0.0, 0.0});

  const std::size_t nb = g.blocks.size(), np = g.pairs.size();
  const auto nl = static_cast<std::size_t>(g.layers());
  g.site_open.assign(nb * nl, 0);
  g.space_open.assign(np * nl, 0);
  g.time_open.assign(nb * (nl > 0 ? nl - 1 : 0), 0);

  if (p.mode == CoarseMode::empirical) {
    parallel_for(np, workers, [&](std::size_t i) {
      auto& pr = g.pairs[i];
      const Region ra = coarse_block(g.blocks[pr.a].coarse, p.L), rb = coarse_block(g.blocks[pr.b].coarse, p.L);
      const auto box = SpaceTimeBox(detail::union_region(ra, rb), 0.0, 1.0);
      const auto env = Environment::from_sampling(h, sys, theta, box.region, lambda);
      const Event ev = Event::connect_sets({{g.blocks[pr.a].u, 0.0, 1.0}}, {{g.blocks[pr.b].u, 0.0, 1.0}});
      const auto e = estimate_event(env, box, ev, p.n_mc, derive_seed(seed, 1, i), 1, SamplerKind::eager);
      pr.log_p_slice = std::log(e.estimate);
      pr.slice_se = e.std_error();
    });
  }
  for (auto& pr : g.pairs) pr.p_bond = bond_occupation_bound_log(pr.log_p_slice, g.T_log);

  if (p.mode == CoarseMode::coupled) {
    const double T = std::exp(g.T_log);
    Site rlo = coarse_block(g.blocks.front().coarse, p.L).lo(), rhi = coarse_block(g.blocks.back().coarse, p.L).hi();
    const auto box = SpaceTimeBox(Region(rlo, rhi), 0.0, T * static_cast<double>(nl));
    const auto env = Environment::from_sampling(h, sys, theta, box.region, lambda);
    Rng rng(derive_seed(seed, 2));
    const auto cfg = sample_configuration(env, box, rng);
    for (std::size_t k = 0; k < nl; ++k) {
      const double t0 = T * static_cast<double>(k), t1 = T * static_cast<double>(k + 1);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto& dd = cfg.deaths[box.region.index(g.blocks[b].u)];
        const auto it = std::upper_bound(dd.begin(), dd.end(), t0);
        g.site_open[k * nb + b] = it == dd.end() || *it >= t1;
      }
      for (std::size_t i = 0; i < np; ++i) {
        const auto& pr = g.pairs[i];
        if (!g.site_open[k * nb + pr.a] || !g.site_open[k * nb + pr.b]) continue;
        const Region sub = detail::union_region(coarse_block(g.blocks[pr.a].coarse, p.L), coarse_block(g.blocks[pr.b].coarse, p.L));
        const auto part = build_clusters(detail::restrict_configuration(cfg, sub, t0, t1));
        const double tm = 0.5 * (t0 + t1);
        g.space_open[k * np + i] = communicates(part, {g.blocks[pr.a].u, tm}, {g.blocks[pr.b].u, tm});
      }
    }
  } else {
    Rng rng(derive_seed(seed, 3));
    for (std::size_t k = 0; k < nl; ++k)
      for (std::size_t b = 0; b < nb; ++b) g.site_open[k * nb + b] = uniform01(rng) < std::exp(g.blocks[b].log_p_site);
    for (std::size_t k = 0; k < nl; ++k)
      for (std::size_t i = 0; i < np; ++i) {
        const bool d_event = uniform01(rng) < g.pairs[i].p_bond;
        g.space_open[k * np + i] = d_event && g.site_open[k * nb + g.pairs[i].a] && g.site_open[k * nb + g.pairs[i].b];
      }
  }
  for (std::size_t k = 0; k + 1 < nl; ++k)
    for (std::size_t b = 0; b < nb; ++b) g.time_open[k * nb + b] = g.site_open[k * nb + b] && g.site_open[(k + 1) * nb + b];
  return g;
}

struct CrossingResult {
  bool crosses = false;
  double largest_cluster_fraction = 0;
  std::size_t occupied_sites = 0;
  int axis = 0;

  nlohmann::json to_json() const {
    return {{"crosses", crosses}, {"largest_cluster_fraction", largest_cluster_fraction}, {"occupied_sites", occupied_sites},
            {"axis", axis}};
  }
};

/// Whether an open path joins the faces {x~_axis = 0} and {x~_axis = n_axis - 1}
/// (axis d is time), with the largest open cluster as a fraction of all
/// coarse sites.
inline CrossingResult coarse_percolates(const CoarseLattice& g, int axis = 0) {
  if (axis < 0 || axis > g.d) throw std::invalid_argument("coarse_percolates: axis out of range");
  const std::size_t nb = g.num_blocks(), np = g.pairs.size(), n = g.num_sites();
  const auto nl = static_cast<std::size_t>(g.layers());
  DisjointSet uf(n + 2);
  const auto face_lo = static_cast<std::uint32_t>(n), face_hi = static_cast<std::uint32_t>(n + 1);
  for (std::size_t k = 0; k < nl; ++k) {
    for (std::size_t i = 0; i < np; ++i)
      if (g.space_open[k * np + i]) uf.unite(static_cast<std::uint32_t>(k * nb + g.pairs[i].a), static_cast<std::uint32_t>(k * nb + g.pairs[i].b));
    if (k + 1 < nl)
      for (std::size_t b = 0; b < nb; ++b)
        if (g.time_open[k * nb + b]) uf.unite(static_cast<std::uint32_t>(k * nb + b), static_cast<std::uint32_t>((k + 1) * nb + b));
  }
  CrossingResult r;
  r.axis = axis;
  std::vector<std::size_t> by_root(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    if (g.site_open[s]) {
      ++r.occupied_sites;
      ++by_root[uf.find(static_cast<std::uint32_t>(s))];
    }
  const std::size_t largest = n ? *std::max_element(by_root.begin(), by_root.end()) : 0;
  r.largest_cluster_fraction = n ? static_cast<double>(largest) / static_cast<double>(n) : 0.0;
  for (std::size_t k = 0; k < nl; ++k)
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t s = k * nb + b;
      if (!g.site_open[s]) continue;
      const std::int64_t coord = axis == g.d ? static_cast<std::int64_t>(k) : g.blocks[b].coarse[axis];
      if (coord == 0) uf.unite(static_cast<std::uint32_t>(s), face_lo);
      if (coord == g.extent[static_cast<std::size_t>(axis)] - 1) uf.unite(static_cast<std::uint32_t>(s), face_hi);
    }
  r.crosses = uf.same(face_lo, face_hi);
  return r;
}

/// The smallest L <= L_max at which, in formula mode, the bond probability
/// and every block's site probability over the spatial extent exceed target.
struct BlockScale {
  std::int64_t L = 0;
  double p_site_min = 0;
  double p_bond = 0;
  double T_log = 0;
  double slice_c = 0;

  nlohmann::json to_json() const {
    return {{"L", L}, {"p_site_min", p_site_min}, {"p_bond", p_bond}, {"T_log", T_log}, {"slice_c", slice_c}};
  }
};

inline BlockScale block_scale_search(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta, double lambda,
                                     double tau, const std::vector<std::int64_t>& spatial_extent, double target = 0.9,
                                     std::int64_t L_max = 5000) {
  const int d = sys.lattice_dim();
  if (static_cast<int>(spatial_extent.size()) != d) throw std::invalid_argument("block_scale_search: extent needs d entries");
  Site lo = Site::origin(d), hi = Site::origin(d);
  for (int i = 0; i < d; ++i) hi[i] = spatial_extent[static_cast<std::size_t>(i)] - 1;
  const Region coarse(lo, hi);
  const double hmax = h.sup_norm();
  for (std::int64_t L = 1; L <= L_max; ++L) {
    const double T_log = std::pow(static_cast<double>(L), tau);
    const auto sb = slice_bond_prob_bound(L, d, lambda, hmax);
    const double pb = bond_occupation_bound_log(sb.log_p, T_log);
    if (!(pb > target)) continue;
    double ps = 1.0;
    for (std::size_t b = 0; b < coarse.size() && ps > target; ++b)
      ps = std::min(ps, site_occupation_prob(block_minimizer(h, sys, theta, coarse_block(coarse.site(b), L)).log_delta, T_log));
    if (ps > target) return {L, ps, pb, T_log, sb.c};
  }
  throw std::runtime_error("block_scale_search: no L <= " + std::to_string(L_max) + " reaches the target");
}

}  // namespace qpfk
