#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qpfk/core/rng.hpp"
#include "qpfk/percolation/clusters.hpp"
#include "qpfk/percolation/configuration.hpp"

namespace qpfk {

/// Randomness for revealing chunks, with a cap on the number of points.
struct RevealSource {
  Rng rng;
  std::size_t points = 0;
  std::size_t limit = 50'000'000;
};

/// A marked Poisson process on one line of the box, revealed in fixed
/// chunks on first access. Disjoint chunks are independent, so the law of
/// whatever gets revealed does not depend on the order of access. Chunks
/// are immutable once revealed and shared between copies of a line.
class LazyLine {
 public:
  using Chunk = std::shared_ptr<const std::vector<detail::Marked>>;

  LazyLine() = default;
  LazyLine(double rate, double lo, double hi) : rate_(rate), lo_(lo), hi_(hi) {
    // chunks are anchored at t = 0 so that resolution near 0 survives huge windows
    if (rate <= 0) return;
    width_ = std::min(hi - lo, 4.0 / rate);
    constexpr double kMax = 4.0e18;
    first_ = static_cast<std::int64_t>(std::clamp(std::floor(lo / width_), -kMax, kMax));
    last_ = static_cast<std::int64_t>(std::clamp(std::ceil(hi / width_) - 1.0, -kMax, kMax));
    active_ = true;
  }

  /// First kept point strictly above t, or +inf.
  template <class Keep>
  double next_above(double t, RevealSource& rng, Keep&& keep) {
    if (!active_) return std::numeric_limits<double>::infinity();
    for (std::int64_t c = chunk_index(t); c <= last_; ++c) {
      for (const auto& p : *chunk(c, rng))
        if (p.t > t && keep(p.mark)) return p.t;
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Last kept point strictly below t, or -inf.
  template <class Keep>
  double next_below(double t, RevealSource& rng, Keep&& keep) {
    if (!active_) return -std::numeric_limits<double>::infinity();
    for (std::int64_t c = chunk_index(t); c >= first_; --c) {
      const auto pts = chunk(c, rng);
      for (auto it = pts->rbegin(); it != pts->rend(); ++it)
        if (it->t < t && keep(it->mark)) return it->t;
    }
    return -std::numeric_limits<double>::infinity();
  }

  /// Kept points in [a, b], appended in increasing order.
  template <class Keep>
  void collect(double a, double b, RevealSource& rng, Keep&& keep, std::vector<double>& out) {
    if (!active_) return;
    for (std::int64_t c = chunk_index(a); c <= last_ && chunk_lo(c) <= b; ++c)
      for (const auto& p : *chunk(c, rng))
        if (p.t >= a && p.t <= b && keep(p.mark)) out.push_back(p.t);
  }

  std::size_t revealed_chunks() const { return revealed_.size(); }

 private:
  double chunk_lo(std::int64_t c) const { return std::max(lo_, static_cast<double>(c) * width_); }
  double chunk_hi(std::int64_t c) const { return c == last_ ? hi_ : std::min(hi_, static_cast<double>(c + 1) * width_); }

  std::int64_t chunk_index(double t) const {
    const double c = std::floor(t / width_);
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::clamp(c, -4.0e18, 4.0e18)), first_, last_);
  }

  Chunk chunk(std::int64_t c, RevealSource& src) {
    auto it = revealed_.find(c);
    if (it != revealed_.end()) return it->second;
    auto pts = std::make_shared<const std::vector<detail::Marked>>(detail::poisson_marked(rate_, chunk_lo(c), chunk_hi(c), src.rng));
    src.points += pts->size();
    if (src.points > src.limit) throw std::runtime_error("LazyWorld: revealed point budget exceeded");
    revealed_.emplace(c, pts);
    return pts;
  }

  double rate_ = 0.0, lo_ = 0.0, hi_ = 0.0, width_ = 1.0;
  std::int64_t first_ = 0, last_ = -1;
  bool active_ = false;
  std::unordered_map<std::int64_t, Chunk> revealed_;
};

/// One sample of the dominating marked processes on a box, revealed on
/// demand. A view thins deaths to delta(x) and bonds to lambda; several
/// views of one world are monotonically coupled. Copies share lines
/// copy-on-write, so cloning a world is cheap.
class LazyWorld {
 public:
  struct View {
    const std::vector<double>* delta = nullptr;  // nullptr: the dominating rates
    double lambda = 0.0;
  };

  struct Segment {
    std::uint32_t site;
    double lo, hi;
    bool bottom, top;  // touches t_lo / t_hi
  };

  LazyWorld(const SpaceTimeBox& box, std::vector<double> death_rate, double bond_rate, std::uint64_t seed,
            std::size_t budget = 20'000'000, std::size_t point_budget = 50'000'000)
      : rng_{Rng(seed), 0, point_budget}, budget_(budget) {
    if (death_rate.size() != box.region.size()) throw std::invalid_argument("LazyWorld: field size mismatch");
    auto sh = std::make_shared<Shared>();
    sh->box = box;
    sh->bond_rate = bond_rate;
    const auto edges = box.region.edges();
    sh->adj.resize(box.region.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      sh->adj[edges[e].first].push_back({edges[e].second, static_cast<std::uint32_t>(e)});
      sh->adj[edges[e].second].push_back({edges[e].first, static_cast<std::uint32_t>(e)});
      edge_lines_.push_back(std::make_shared<LazyLine>(bond_rate, box.t_lo, box.t_hi));
    }
    for (double r : death_rate) site_lines_.push_back(std::make_shared<LazyLine>(r, box.t_lo, box.t_hi));
    sh->vertical.resize(box.region.size());
    for (std::size_t i = 0; i < sh->vertical.size(); ++i) sh->vertical[i] = box.on_vertical_boundary(i);
    sh->death_rate = std::move(death_rate);
    shared_ = std::move(sh);
  }

  const SpaceTimeBox& box() const { return shared_->box; }

  /// Replaces the generator used for unrevealed chunks. A reseeded copy of a
  /// world continues with fresh randomness, conditional on what is revealed.
  void reseed(std::uint64_t seed) { rng_.rng.seed(seed); }

  Segment segment_at(std::uint32_t s, double t, const View& v) {
    const double keep = death_keep(s, v);
    auto k = [keep](double m) { return m < keep; };
    auto& line = own(site_lines_[s]);
    const double below = line.next_below(t, rng_, k);
    const double above = line.next_above(t, rng_, k);
    if (below == t || above == t) throw std::domain_error("LazyWorld: point sits on a death");
    const auto& box = shared_->box;
    return Segment{s, std::max(below, box.t_lo), std::min(above, box.t_hi), std::isinf(below), std::isinf(above)};
  }

  /// Breadth-first exploration of the clusters of the source segments;
  /// returns true as soon as `stop(segment)` holds for an explored segment.
  template <class Stop>
  bool explore(std::vector<Segment> sources, const View& v, Stop&& stop) {
    start(std::move(sources));
    return advance(v, stop);
  }

  /// Resets the exploration state to the given sources.
  void start(std::vector<Segment> sources) {
    visited_.clear();
    queue_.clear();
    steps_ = 0;
    for (const auto& g : sources)
      if (visited_.insert(key(g)).second) queue_.push_back(g);
  }

  /// Continues the current exploration. A segment satisfying `stop` stays
  /// at the front of the queue, so a later call with a stricter stop
  /// condition resumes from it. The exploration state is part of the world
  /// and is copied with it.
  template <class Stop>
  bool advance(const View& v, Stop&& stop) {
    const double keep = bond_keep(v);
    auto k = [keep](double m) { return m < keep; };
    std::vector<double> times;
    while (!queue_.empty()) {
      const Segment g = queue_.front();
      if (stop(g)) return true;
      queue_.pop_front();
      if (++steps_ > budget_) throw std::runtime_error("LazyWorld: exploration budget exceeded");
      for (const auto& [y, e] : shared_->adj[g.site]) {
        times.clear();
        own(edge_lines_[e]).collect(g.lo, g.hi, rng_, k, times);
        for (double t : times) {
          const Segment n = segment_at(y, t, v);
          if (visited_.insert(key(n)).second) queue_.push_back(n);
        }
      }
    }
    return false;
  }

  /// The segments of site s meeting [a, b], in time order.
  std::vector<Segment> segments_meeting(std::uint32_t s, double a, double b, const View& v) {
    std::vector<Segment> out;
    const double keep = death_keep(s, v);
    auto k = [keep](double m) { return m < keep; };
    Segment g = segment_at(s, a, v);
    out.push_back(g);
    while (!g.top && g.hi < b) {
      const double above = own(site_lines_[s]).next_above(g.hi, rng_, k);
      g = Segment{s, g.hi, std::min(above, shared_->box.t_hi), false, std::isinf(above)};
      out.push_back(g);
    }
    return out;
  }

  bool on_vertical_boundary(std::uint32_t s) const { return shared_->vertical[s] != 0; }

 private:
  struct Shared {
    SpaceTimeBox box;
    std::vector<double> death_rate;
    double bond_rate = 0.0;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj;
    std::vector<char> vertical;
  };

  struct KeyHash {
    std::size_t operator()(const std::pair<std::uint32_t, double>& k) const {
      return std::hash<double>{}(k.second) * 31u + k.first;
    }
  };
  static std::pair<std::uint32_t, double> key(const Segment& g) { return {g.site, g.lo}; }

  // Copy-on-write: a line shared with another world is cloned before use.
  // The acquire fence pairs with the release in the other owner's drop.
  static LazyLine& own(std::shared_ptr<LazyLine>& p) {
    if (p.use_count() == 1) {
      std::atomic_thread_fence(std::memory_order_acquire);
      return *p;
    }
    p = std::make_shared<LazyLine>(*p);
    return *p;
  }

  double death_keep(std::uint32_t s, const View& v) const {
    if (!v.delta) return 1.0;
    const double dom = shared_->death_rate[s];
    if ((*v.delta)[s] > dom * (1 + 1e-15)) throw std::invalid_argument("LazyWorld: view rate exceeds the dominating rate");
    return dom > 0 ? (*v.delta)[s] / dom : 0.0;
  }
  double bond_keep(const View& v) const {
    const double b = shared_->bond_rate;
    if (v.lambda > b * (1 + 1e-15)) throw std::invalid_argument("LazyWorld: view lambda exceeds the dominating rate");
    return b > 0 ? v.lambda / b : 0.0;
  }

  std::shared_ptr<const Shared> shared_;
  RevealSource rng_;
  std::size_t budget_;
  std::vector<std::shared_ptr<LazyLine>> site_lines_, edge_lines_;
  std::unordered_set<std::pair<std::uint32_t, double>, KeyHash> visited_;
  std::deque<Segment> queue_;
  std::size_t steps_ = 0;
};

}  // namespace qpfk
