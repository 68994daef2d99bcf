#pragma once

#include <cstdint>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpfk/core/parallel.hpp"
#include "qpfk/core/rng.hpp"
#include "qpfk/core/stats.hpp"
#include "qpfk/percolation/clusters.hpp"
#include "qpfk/percolation/configuration.hpp"
#include "qpfk/percolation/explorer.hpp"

namespace qpfk {

/// escape(x): (x, t) <-> boundary of the box; connect(X, Y); connect_sets(W1, W2).
struct Event {
  enum class Kind { escape, connect, connect_sets };
  Kind kind = Kind::escape;
  SpaceTimePoint from;
  SpaceTimePoint to;
  std::vector<LinePiece> w1, w2;

  static Event escape(const Site& x, double t = 0.0) { return {Kind::escape, {x, t}, {}, {}, {}}; }
  static Event connect(SpaceTimePoint a, SpaceTimePoint b) { return {Kind::connect, a, b, {}, {}}; }
  static Event connect_sets(std::vector<LinePiece> a, std::vector<LinePiece> b) {
    return {Kind::connect_sets, {}, {}, std::move(a), std::move(b)};
  }

  std::string describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    switch (kind) {
      case Kind::escape: os << "escape" << from.x.to_string() << "@" << from.t; break;
      case Kind::connect: os << "connect" << from.x.to_string() << "@" << from.t << "~" << to.x.to_string() << "@" << to.t; break;
      default: os << "connect_sets[" << w1.size() << "~" << w2.size() << "]";
    }
    return os.str();
  }
};

/// Whether the event holds in a fully sampled configuration.
inline bool event_holds(const ClusterPartition& p, const Event& ev) {
  switch (ev.kind) {
    case Event::Kind::escape: return p.reaches_boundary(ev.from);
    case Event::Kind::connect: return p.communicates(ev.from, ev.to);
    default: return p.connects(ev.w1, ev.w2);
  }
}

/// Whether the event holds in one view of a lazily revealed world.
inline bool event_holds(LazyWorld& w, const Event& ev, const LazyWorld::View& v) {
  const auto& box = w.box();
  auto index = [&](const Site& x, double t) {
    if (!box.contains(x, t)) throw std::out_of_range("event: point outside the box");
    return static_cast<std::uint32_t>(box.region.index(x));
  };
  switch (ev.kind) {
    case Event::Kind::escape: {
      const auto s = index(ev.from.x, ev.from.t);
      return w.explore({w.segment_at(s, ev.from.t, v)}, v, [&](const LazyWorld::Segment& g) {
        return g.bottom || g.top || w.on_vertical_boundary(g.site);
      });
    }
    case Event::Kind::connect: {
      const auto s = index(ev.from.x, ev.from.t), y = index(ev.to.x, ev.to.t);
      const double ty = ev.to.t;
      return w.explore({w.segment_at(s, ev.from.t, v)}, v, [&](const LazyWorld::Segment& g) {
        return g.site == y && g.lo < ty && ty < g.hi;
      }) || (s == y && ev.from.t == ty);
    }
    default: {
      std::vector<LazyWorld::Segment> sources;
      for (const auto& p : ev.w1) {
        const auto s = index(p.x, p.a);
        index(p.x, p.b);
        for (const auto& g : w.segments_meeting(s, p.a, p.b, v)) sources.push_back(g);
      }
      std::vector<std::uint32_t> targets;
      for (const auto& p : ev.w2) {
        targets.push_back(index(p.x, p.a));
        index(p.x, p.b);
      }
      return w.explore(std::move(sources), v, [&](const LazyWorld::Segment& g) {
        for (std::size_t i = 0; i < ev.w2.size(); ++i)
          if (targets[i] == g.site && g.lo <= ev.w2[i].b && g.hi >= ev.w2[i].a) return true;
        return false;
      });
    }
  }
}

enum class SamplerKind { lazy, eager };

/// Monte Carlo estimate of Q_{delta;lambda}(event) (q = 1) from n
/// independent samples. Sample i uses the stream derive_seed(seed, i), so
/// the result does not depend on the worker count.
inline EstimateCI estimate_event(const Environment& env, const SpaceTimeBox& box, const Event& ev, std::uint64_t n_samples,
                                 std::uint64_t seed, unsigned workers = 1, SamplerKind kind = SamplerKind::lazy) {
  if (n_samples < 1) throw std::invalid_argument("estimate_event: n_samples must be >= 1");
  const auto rates = detail::rates_on_box(env, box);
  std::vector<char> hit(n_samples, 0);
  parallel_for(n_samples, workers, [&](std::size_t i) {
    const auto s = derive_seed(seed, i);
    if (kind == SamplerKind::lazy) {
      LazyWorld w(box, rates, env.lambda, s);
      hit[i] = event_holds(w, ev, {nullptr, env.lambda});
    } else {
      Rng rng(s);
      hit[i] = event_holds(build_clusters(sample_configuration(env, box, rng)), ev);
    }
  });
  std::uint64_t k = 0;
  for (char h : hit) k += h;
  return EstimateCI::from_counts(k, n_samples, seed);
}

/// Coupled estimates over an ascending lambda grid: every sample is one
/// world at the largest lambda, thinned for the others. indicators[i][j]
/// is the event for sample i at lambda_j, monotone in j for increasing events.
struct LambdaSweep {
  std::vector<double> lambdas;
  std::vector<EstimateCI> estimates;
  std::vector<std::vector<char>> indicators;
};

inline LambdaSweep estimate_lambda_sweep(const Environment& env, const SpaceTimeBox& box, const Event& ev,
                                         const std::vector<double>& lambdas, std::uint64_t n_samples, std::uint64_t seed,
                                         unsigned workers = 1) {
  LambdaSweep out;
  out.lambdas = lambdas;
  if (lambdas.empty()) return out;
  for (std::size_t j = 1; j < lambdas.size(); ++j)
    if (lambdas[j] < lambdas[j - 1]) throw std::invalid_argument("lambda sweep: grid must be ascending");
  if (lambdas.front() < 0) throw std::invalid_argument("lambda sweep: negative lambda");
  const auto rates = detail::rates_on_box(env, box);
  out.indicators.assign(n_samples, std::vector<char>(lambdas.size(), 0));
  parallel_for(n_samples, workers, [&](std::size_t i) {
    LazyWorld w(box, rates, lambdas.back(), derive_seed(seed, i));
    for (std::size_t j = 0; j < lambdas.size(); ++j) out.indicators[i][j] = event_holds(w, ev, {nullptr, lambdas[j]});
  });
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    std::uint64_t k = 0;
    for (const auto& row : out.indicators) k += row[j];
    out.estimates.push_back(EstimateCI::from_counts(k, n_samples, seed));
  }
  return out;
}

/// Multilevel splitting estimate of an escape probability: level j is
/// reached when the cluster of (x, 0) meets a site at sup-distance >= j
/// from x (or the top or bottom of the box). Each replica runs a fixed
/// number of worlds per level, clones survivors (revealed randomness and
/// exploration state) uniformly and reseeds the clones; the product of
/// level frequencies is unbiased for the escape probability. Replicas give
/// the standard error.
struct SplittingEstimate {
  double estimate = 0;
  double std_error = 0;
  std::vector<double> replica_estimates;
  std::uint64_t per_level = 0;
  std::uint64_t seed = 0;

  double log_estimate() const { return std::log(estimate); }
  double log_std_error() const { return estimate > 0 ? std_error / estimate : std::numeric_limits<double>::infinity(); }
};

inline SplittingEstimate escape_splitting(const Environment& env, const SpaceTimeBox& box, const Site& x, std::uint64_t per_level,
                                          std::uint64_t replicas, std::uint64_t seed, unsigned workers = 1,
                                          std::size_t point_budget = 0) {
  if (per_level < 1 || replicas < 2) throw std::invalid_argument("escape_splitting: need per_level >= 1 and replicas >= 2");
  if (!box.region.contains(x)) throw std::out_of_range("escape_splitting: source outside the box");
  const auto rates = detail::rates_on_box(env, box);
  if (point_budget == 0) point_budget = std::max<std::size_t>(100'000, 100'000'000 / per_level);
  const auto src = static_cast<std::uint32_t>(box.region.index(x));
  std::vector<std::int64_t> dist(box.region.size());
  std::int64_t top = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    dist[i] = (box.region.site(i) - x).sup_norm();
    if (box.on_vertical_boundary(i)) top = std::max(top, dist[i]);
  }
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (box.on_vertical_boundary(i)) dist[i] = top;  // the whole side boundary is the last level
  const LazyWorld::View view{nullptr, env.lambda};
  SplittingEstimate out;
  out.per_level = per_level;
  out.seed = seed;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    std::vector<LazyWorld> worlds;
    worlds.reserve(per_level);
    for (std::uint64_t i = 0; i < per_level; ++i) {
      worlds.emplace_back(box, rates, env.lambda, derive_seed(seed, r, i), 20'000'000, point_budget);
      worlds.back().start({worlds.back().segment_at(src, 0.0, view)});
    }
    double p = 1.0;
    for (std::int64_t level = 1; level <= top; ++level) {
      std::vector<char> hit(worlds.size(), 0);
      parallel_for(worlds.size(), workers, [&](std::size_t i) {
        hit[i] = worlds[i].advance(view, [&](const LazyWorld::Segment& g) {
          return g.bottom || g.top || dist[g.site] >= level;
        });
      });
      std::vector<std::size_t> alive;
      for (std::size_t i = 0; i < hit.size(); ++i)
        if (hit[i]) alive.push_back(i);
      p *= static_cast<double>(alive.size()) / static_cast<double>(worlds.size());
      if (alive.empty() || level == top) break;
      Rng pick(derive_seed(seed, r, per_level + static_cast<std::uint64_t>(level)));
      std::vector<LazyWorld> next;
      next.reserve(per_level);
      for (std::uint64_t i = 0; i < per_level; ++i) {
        const auto j = alive[static_cast<std::size_t>(uniform01(pick) * static_cast<double>(alive.size()))];
        next.push_back(worlds[j]);
        next.back().reseed(derive_seed(derive_seed(seed, ~r), static_cast<std::uint64_t>(level), i));
      }
      worlds.swap(next);
    }
    out.replica_estimates.push_back(p);
  }
  out.estimate = mean(out.replica_estimates);
  out.std_error = std::sqrt(variance(out.replica_estimates) / static_cast<double>(replicas));
  return out;
}

inline void write_estimate_header(std::ostream& os) { os << "event,L,T,lambda,field_hash,estimate,ci_lo,ci_hi,n,seed\n"; }

inline void write_estimate_row(std::ostream& os, const Event& ev, std::int64_t L, double T, double lambda, std::uint64_t field_hash,
                               const EstimateCI& e) {
  std::ostringstream line;
  line << std::setprecision(17) << '"' << ev.describe() << "\"," << L << ',' << T << ',' << lambda << ',' << std::hex << field_hash
       << std::dec << ',' << e.estimate << ',' << e.ci_lo << ',' << e.ci_hi << ',' << e.trials << ',' << e.seed << '\n';
  os << line.str();
}

}  // namespace qpfk
