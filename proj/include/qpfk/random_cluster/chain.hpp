#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "qpfk/core/rng.hpp"
#include "qpfk/percolation/clusters.hpp"
#include "qpfk/percolation/configuration.hpp"

namespace qpfk {

/// Birth-death Metropolis chain for the random-cluster measure
/// dQ^(q) ∝ q^{k_B} dQ_{delta;lambda} on a box. Lines are the site lines
/// (death processes) followed by the edge lines (bond processes); a sweep
/// is one proposal per line.
class RcmChain {
 public:
  struct Stats {
    std::uint64_t steps = 0;
    std::uint64_t births_proposed = 0, births_accepted = 0;
    std::uint64_t deaths_proposed = 0, deaths_accepted = 0;
    double acceptance_rate() const {
      const auto p = births_proposed + deaths_proposed;
      return p ? static_cast<double>(births_accepted + deaths_accepted) / static_cast<double>(p) : 0.0;
    }
  };

  /// A proposed move: insert time t on a line, or remove point `index`.
  struct Move {
    bool birth = true;
    std::size_t line = 0;
    double t = 0.0;
    std::size_t index = 0;
  };

  RcmChain(const Environment& env, Configuration start, std::uint64_t verify_every = 1000)
      : cfg_(std::move(start)), q_(env.q), lambda_(env.lambda), verify_every_(verify_every) {
    if (!(env.q >= 1)) throw std::invalid_argument("RcmChain: only q >= 1 is supported");
    rates_ = detail::rates_on_box(env, cfg_.box);
    cfg_.validate();
    adj_.resize(cfg_.deaths.size());
    for (std::size_t e = 0; e < cfg_.edges.size(); ++e) {
      adj_[cfg_.edges[e].first].push_back({cfg_.edges[e].second, e});
      adj_[cfg_.edges[e].second].push_back({cfg_.edges[e].first, e});
    }
    k_ = build_clusters(cfg_).num_clusters();
  }

  const Configuration& config() const { return cfg_; }
  std::size_t k_B() const { return k_; }
  const Stats& stats() const { return stats_; }
  std::size_t num_lines() const { return cfg_.deaths.size() + cfg_.bonds.size(); }
  double q() const { return q_; }

  double line_rate(std::size_t line) const { return line < rates_.size() ? rates_[line] : lambda_; }
  const std::vector<double>& line_points(std::size_t line) const {
    return line < cfg_.deaths.size() ? cfg_.deaths[line] : cfg_.bonds[line - cfg_.deaths.size()];
  }

  /// Change in k_B if the move were applied (the configuration is left unchanged).
  int delta_k(const Move& m) {
    apply(m, +1);
    const int after = local_delta(m);
    apply(m, -1);
    return after;
  }

  /// Metropolis acceptance probability of a move.
  double acceptance(const Move& m) {
    const double len = cfg_.box.height();
    const double rho = line_rate(m.line);
    const auto n = static_cast<double>(line_points(m.line).size());
    const double qk = std::pow(q_, delta_k(m));
    const double ratio = m.birth ? rho * len / (n + 1.0) * qk : n / (rho * len) * qk;
    return std::min(1.0, ratio);
  }

  /// One proposal: uniform line, birth or death with probability 1/2 each.
  void step(Rng& rng) {
    ++stats_.steps;
    Move m;
    m.line = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(num_lines()));
    m.birth = uniform01(rng) < 0.5;
    const auto& pts = line_points(m.line);
    if (m.birth) {
      ++stats_.births_proposed;
      m.t = cfg_.box.t_lo + cfg_.box.height() * uniform01(rng);
      if (!legal_birth(m)) return;
    } else {
      ++stats_.deaths_proposed;
      if (pts.empty()) {
        maybe_verify();
        return;
      }
      m.index = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pts.size()));
    }
    const double len = cfg_.box.height();
    const double rho = line_rate(m.line);
    const auto n = static_cast<double>(pts.size());
    if (m.birth && rho <= 0) {
      maybe_verify();
      return;
    }
    apply(m, +1);
    const int dk = local_delta(m);
    const double ratio = (m.birth ? rho * len / (n + 1.0) : n / (rho * len)) * std::pow(q_, dk);
    if (ratio >= 1.0 || uniform01(rng) < ratio) {
      k_ = static_cast<std::size_t>(static_cast<long long>(k_) + dk);
      (m.birth ? stats_.births_accepted : stats_.deaths_accepted)++;
    } else {
      apply(m, -1);
    }
    maybe_verify();
  }

  void sweep(Rng& rng) {
    for (std::size_t i = 0; i < num_lines(); ++i) step(rng);
  }

  /// Unnormalised target density of a configuration relative to the
  /// unit-rate Poisson reference: prod_lines rho^n e^{-(rho - 1)|I|} q^{k_B}.
  double log_density(const Configuration& c) const {
    double v = std::log(q_) * static_cast<double>(build_clusters(c).num_clusters());
    const double len = c.box.height();
    for (std::size_t l = 0; l < num_lines(); ++l) {
      const double rho = line_rate(l);
      const auto n = static_cast<double>(l < c.deaths.size() ? c.deaths[l].size() : c.bonds[l - c.deaths.size()].size());
      if (n > 0) {
        if (rho <= 0) return -std::numeric_limits<double>::infinity();
        v += n * std::log(rho);
      }
      v -= (rho - 1.0) * len;
    }
    return v;
  }

  /// Recomputes k_B from scratch and throws if the cached value disagrees.
  void verify() const {
    const auto k = build_clusters(cfg_).num_clusters();
    if (k != k_) throw std::logic_error("RcmChain: cached k_B " + std::to_string(k_) + " != recount " + std::to_string(k));
  }

 private:
  bool legal_birth(const Move& m) const {
    // reject exact coincidences (probability zero) instead of handling them
    const auto& pts = line_points(m.line);
    if (std::binary_search(pts.begin(), pts.end(), m.t)) return false;
    if (m.line < cfg_.deaths.size()) {
      for (const auto& [y, e] : adj_[m.line])
        if (std::binary_search(cfg_.bonds[e].begin(), cfg_.bonds[e].end(), m.t)) return false;
    } else {
      const auto& [a, b] = cfg_.edges[m.line - cfg_.deaths.size()];
      for (auto s : {a, b})
        if (std::binary_search(cfg_.deaths[s].begin(), cfg_.deaths[s].end(), m.t)) return false;
    }
    return true;
  }

  std::vector<double>& mutable_points(std::size_t line) {
    return line < cfg_.deaths.size() ? cfg_.deaths[line] : cfg_.bonds[line - cfg_.deaths.size()];
  }

  // dir = +1 applies the move, -1 undoes it. For deaths, the removed time is
  // stashed so the undo can reinsert it.
  void apply(const Move& m, int dir) {
    auto& pts = mutable_points(m.line);
    const bool insert = m.birth == (dir > 0);
    if (insert) {
      const double t = m.birth ? m.t : stash_;
      pts.insert(std::upper_bound(pts.begin(), pts.end(), t), t);
    } else {
      const std::size_t i = m.birth ? static_cast<std::size_t>(std::lower_bound(pts.begin(), pts.end(), m.t) - pts.begin()) : m.index;
      stash_ = pts[i];
      pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  // k_B(after) - k_B(before) for a move that has just been applied.
  int local_delta(const Move& m) {
    const bool on_site = m.line < cfg_.deaths.size();
    const double t = m.birth ? m.t : stash_;
    if (on_site) {
      const auto s = static_cast<std::uint32_t>(m.line);
      const auto& d = cfg_.deaths[s];
      const auto j = static_cast<std::uint32_t>(std::lower_bound(d.begin(), d.end(), t) - d.begin());
      if (m.birth) {
        // t now a death at index j: segments j (below) and j + 1 (above)
        return connected({s, j}, {s, j + 1}) ? 0 : 1;
      }
      // merged segment j; before the removal the halves were separate
      // segments, connected iff they are now joined by some other route.
      // Re-split temporarily to test.
      auto& dd = cfg_.deaths[s];
      dd.insert(dd.begin() + j, t);
      const bool was_connected = connected({s, j}, {s, j + 1});
      dd.erase(dd.begin() + j);
      return was_connected ? 0 : -1;
    }
    const std::size_t e = m.line - cfg_.deaths.size();
    const auto [a, b] = cfg_.edges[e];
    const SegId sa{a, seg_index(a, t)}, sb{b, seg_index(b, t)};
    if (m.birth) {
      auto& bb = cfg_.bonds[e];
      const auto it = std::lower_bound(bb.begin(), bb.end(), t);
      bb.erase(it);
      const bool was_connected = connected(sa, sb);
      bb.insert(std::upper_bound(bb.begin(), bb.end(), t), t);
      return was_connected ? 0 : -1;
    }
    return connected(sa, sb) ? 0 : 1;
  }

  struct SegId {
    std::uint32_t site;
    std::uint32_t j;
  };

  std::uint32_t seg_index(std::uint32_t s, double t) const {
    const auto& d = cfg_.deaths[s];
    return static_cast<std::uint32_t>(std::lower_bound(d.begin(), d.end(), t) - d.begin());
  }

  // Breadth-first search over segments in the current configuration.
  bool connected(SegId from, SegId to) {
    if (from.site == to.site && from.j == to.j) return true;
    auto key = [](SegId g) { return (static_cast<std::uint64_t>(g.site) << 32) | g.j; };
    seen_.clear();
    frontier_.clear();
    frontier_.push_back(from);
    seen_.insert(key(from));
    for (std::size_t head = 0; head < frontier_.size(); ++head) {
      const SegId g = frontier_[head];
      const auto& d = cfg_.deaths[g.site];
      const double lo = g.j == 0 ? cfg_.box.t_lo : d[g.j - 1];
      const double hi = g.j == d.size() ? cfg_.box.t_hi : d[g.j];
      for (const auto& [y, e] : adj_[g.site]) {
        const auto& bb = cfg_.bonds[e];
        for (auto it = std::upper_bound(bb.begin(), bb.end(), lo); it != bb.end() && *it < hi; ++it) {
          const SegId n{static_cast<std::uint32_t>(y), seg_index(static_cast<std::uint32_t>(y), *it)};
          if (n.site == to.site && n.j == to.j) return true;
          if (seen_.insert(key(n)).second) frontier_.push_back(n);
        }
      }
    }
    return false;
  }

  void maybe_verify() {
    if (verify_every_ && stats_.steps % verify_every_ == 0) verify();
  }

  Configuration cfg_;
  std::vector<double> rates_;
  double q_;
  double lambda_;
  std::uint64_t verify_every_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj_;
  std::size_t k_ = 0;
  Stats stats_;
  double stash_ = 0.0;
  std::unordered_set<std::uint64_t> seen_;
  std::vector<SegId> frontier_;
};

}  // namespace qpfk
