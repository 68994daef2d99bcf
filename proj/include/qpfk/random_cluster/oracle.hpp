#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "qpfk/core/disjoint_set.hpp"
#include "qpfk/core/lattice.hpp"

namespace qpfk {

/// Time-discretised random-cluster model: sites x slices, a time edge
/// between consecutive slices of a site open with probability
/// exp(-delta dt) (no cut in the slice), a space edge inside a slice open
/// with probability 1 - exp(-lambda dt), and weight q^{#components}.
/// The window [-T, T] is cut into M slices; time t sits in slice
/// floor((t + T) / dt), so t = 0 is slice M / 2.
class DiscretizedOracle {
 public:
  DiscretizedOracle(Region region, std::vector<double> delta, double lambda, double q, double T, std::size_t slices)
      : region_(std::move(region)), delta_(std::move(delta)), lambda_(lambda), q_(q), T_(T), M_(slices) {
    if (delta_.size() != region_.size()) throw std::invalid_argument("DiscretizedOracle: field size mismatch");
    if (!(q_ >= 1)) throw std::invalid_argument("DiscretizedOracle: q must be >= 1");
    if (M_ < 1 || !(T_ > 0)) throw std::invalid_argument("DiscretizedOracle: need slices >= 1 and T > 0");
    space_edges_ = region_.edges();
  }

  static DiscretizedOracle uniform(Region region, double delta, double lambda, double q, double T, double dt) {
    const double m = 2.0 * T / dt;
    if (std::abs(m - std::round(m)) > 1e-9) throw std::invalid_argument("DiscretizedOracle: 2T / dt must be an integer");
    const std::size_t n = region.size();
    return DiscretizedOracle(std::move(region), std::vector<double>(n, delta), lambda, q, T, static_cast<std::size_t>(std::round(m)));
  }

  double dt() const { return 2.0 * T_ / static_cast<double>(M_); }
  std::size_t slices() const { return M_; }
  std::size_t num_edges() const { return region_.size() * (M_ - 1) + space_edges_.size() * M_; }

  std::size_t slice_of(double t) const {
    if (t < -T_ || t > T_) throw std::out_of_range("DiscretizedOracle: time outside the window");
    return std::min(M_ - 1, static_cast<std::size_t>(std::floor((t + T_) / dt())));
  }

  /// P((x, tx) <-> (y, ty)) by summing over all 2^E edge states; E <= 24.
  double connect_enumerate(const Site& x, double tx, const Site& y, double ty) const {
    const std::size_t E = num_edges();
    if (E > 24) throw std::length_error("DiscretizedOracle: " + std::to_string(E) + " edges exceed the enumeration limit of 24");
    const std::size_t n = region_.size();
    struct Edge {
      std::uint32_t a, b;
      double p;
    };
    std::vector<Edge> edges;
    auto vid = [&](std::size_t s, std::size_t m) { return static_cast<std::uint32_t>(m * n + s); };
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t m = 0; m + 1 < M_; ++m) edges.push_back({vid(s, m), vid(s, m + 1), std::exp(-delta_[s] * dt())});
    for (std::size_t m = 0; m < M_; ++m)
      for (const auto& [a, b] : space_edges_) edges.push_back({vid(a, m), vid(b, m), -std::expm1(-lambda_ * dt())});
    const auto u = vid(region_.index(x), slice_of(tx)), w = vid(region_.index(y), slice_of(ty));
    long double z = 0, hit = 0;  // 2^24 terms: keep the roundoff below 1e-12
    DisjointSet ds;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << E); ++mask) {
      ds.reset(n * M_);
      long double weight = 1;
      for (std::size_t e = 0; e < E; ++e) {
        if (mask >> e & 1) {
          weight *= edges[e].p;
          ds.unite(edges[e].a, edges[e].b);
        } else {
          weight *= 1 - edges[e].p;
        }
      }
      weight *= std::pow(q_, static_cast<double>(ds.num_sets()));
      z += weight;
      if (ds.same(u, w)) hit += weight;
    }
    return static_cast<double>(hit / z);
  }

  /// The same probability by a transfer matrix over connectivity states of
  /// one slice, for slice counts far beyond enumeration. Requires tx, ty in
  /// one slice.
  double connect_transfer(const Site& x, double tx, const Site& y, double ty) const {
    const std::size_t me = slice_of(tx);
    if (slice_of(ty) != me) throw std::invalid_argument("connect_transfer: both points must share a slice");
    const std::size_t n = region_.size();
    if (n > 12) throw std::length_error("connect_transfer: too many sites");
    const std::size_t gx = n, gy = n + 1;  // ghost labels recording the event vertices
    const auto ix = region_.index(x), iy = region_.index(y);
    constexpr std::uint8_t kUnset = 0xff;

    // State: class label per current vertex, then the two ghosts (kUnset
    // before the event slice). Weight: probability times q^{closed classes}.
    using State = std::vector<std::uint8_t>;
    auto canonical = [&](State s) {
      std::uint8_t map[64];
      std::fill(std::begin(map), std::end(map), kUnset);
      std::uint8_t next = 0;
      for (auto& l : s) {
        if (l == kUnset) continue;
        if (map[l] == kUnset) map[l] = next++;
        l = map[l];
      }
      return s;
    };
    const double p_space = -std::expm1(-lambda_ * dt());

    // Applies the space edges of the current slice to every state.
    auto space_step = [&](std::map<State, double>& in) {
      for (const auto& [a, b] : space_edges_) {
        std::map<State, double> out;
        for (const auto& [s, w] : in) {
          out[s] += w * (1 - p_space);
          State t = s;
          const auto la = t[a], lb = t[b];
          if (la != lb)
            for (auto& l : t)
              if (l == lb) l = la;
          out[canonical(t)] += w * p_space;
        }
        in.swap(out);
      }
    };

    std::map<State, double> cur;
    {
      State s(n + 2, kUnset);
      for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<std::uint8_t>(i);
      cur[canonical(s)] = 1.0;
    }
    space_step(cur);
    auto mark_event = [&](std::map<State, double>& in) {
      std::map<State, double> out;
      for (const auto& [s, w] : in) {
        State t = s;
        t[gx] = t[ix];
        t[gy] = t[iy];
        out[canonical(t)] += w;
      }
      in.swap(out);
    };
    if (me == 0) mark_event(cur);

    for (std::size_t m = 1; m < M_; ++m) {
      // time edges: each vertex keeps its class (open) or starts a new one
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::exp(-delta_[i] * dt());
        std::map<State, double> out;
        for (const auto& [s, w] : cur) {
          out[s] += w * p;
          State t = s;
          t[i] = 60;  // fresh label; canonical() keeps it distinct
          t.push_back(s[i]);  // the old class, closed out at the end of the slice if empty
          out[canonical(std::move(t))] += w * (1 - p);
        }
        cur.swap(out);
      }
      close_pending(cur, n);
      space_step(cur);
      if (m == me) mark_event(cur);
    }
    double z = 0, hit = 0;
    for (const auto& [s, w] : cur) {
      std::vector<std::uint8_t> live;
      for (std::size_t i = 0; i < n; ++i) live.push_back(s[i]);
      std::sort(live.begin(), live.end());
      const auto classes = static_cast<double>(std::unique(live.begin(), live.end()) - live.begin());
      const double weight = w * std::pow(q_, classes);
      z += weight;
      if (s[gx] == s[gy]) hit += weight;
    }
    return hit / z;
  }

 private:
  // States carry the labels of classes that lost a vertex this slice after
  // index n + 1; a class no current vertex holds is complete and gets q.
  void close_pending(std::map<std::vector<std::uint8_t>, double>& cur, std::size_t n) const {
    std::map<std::vector<std::uint8_t>, double> out;
    for (const auto& [s, w] : cur) {
      std::vector<std::uint8_t> base(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n + 2));
      std::vector<std::uint8_t> pending(s.begin() + static_cast<std::ptrdiff_t>(n + 2), s.end());
      std::sort(pending.begin(), pending.end());
      pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
      double weight = w;
      for (auto old : pending) {
        bool alive = false;
        for (std::size_t j = 0; j < n; ++j) alive |= base[j] == old;
        if (!alive) weight *= q_;
      }
      std::uint8_t map[64];
      std::fill(std::begin(map), std::end(map), std::uint8_t{0xff});
      std::uint8_t next = 0;
      for (auto& l : base) {
        if (l == 0xff) continue;
        if (map[l] == 0xff) map[l] = next++;
        l = map[l];
      }
      out[base] += weight;
    }
    cur.swap(out);
  }

  Region region_;
  std::vector<double> delta_;
  double lambda_;
  double q_;
  double T_;
  std::size_t M_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> space_edges_;
};

}  // namespace qpfk
