#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qpfk/core/disjoint_set.hpp"
#include "qpfk/percolation/configuration.hpp"

namespace qpfk {

/// A piece {site} x [a, b] of a space-time line, used to describe sets
/// W1, W2 in connection events.
struct LinePiece {
  Site x;
  double a = 0.0;
  double b = 0.0;
};

/// Maximal death-free segments of every line, grouped into clusters.
/// Segment j of site s is [deaths[s][j-1], deaths[s][j]] with the window
/// ends standing in at either side.
class ClusterPartition {
 public:
  explicit ClusterPartition(const Configuration& c) : box_(c.box), deaths_(c.deaths) {
    offset_.push_back(0);
    for (const auto& d : deaths_) offset_.push_back(offset_.back() + static_cast<std::uint32_t>(d.size() + 1));
    DisjointSet uf(offset_.back());
    for (std::size_t e = 0; e < c.edges.size(); ++e)
      for (double t : c.bonds[e]) uf.unite(segment_of(c.edges[e].first, t), segment_of(c.edges[e].second, t));
    k_ = uf.num_sets();
    label_.resize(uf.size());
    for (std::uint32_t i = 0; i < label_.size(); ++i) label_[i] = uf.find(i);

    boundary_.assign(label_.size(), 0);
    for (std::size_t s = 0; s < deaths_.size(); ++s) {
      const bool vertical = box_.on_vertical_boundary(s);
      const std::uint32_t first = offset_[s], last = offset_[s + 1] - 1;
      for (std::uint32_t g = first; g <= last; ++g)
        if (vertical || g == first || g == last) boundary_[label_[g]] = 1;
    }
  }

  /// k_B, the number of clusters in the box.
  std::size_t num_clusters() const { return k_; }
  std::size_t num_segments() const { return label_.size(); }

  /// Segment index containing time t on site s; t must not be a death time.
  std::uint32_t segment_of(std::size_t s, double t) const {
    if (t < box_.t_lo || t > box_.t_hi) throw std::out_of_range("segment_of: time outside the window");
    const auto& d = deaths_[s];
    const auto it = std::lower_bound(d.begin(), d.end(), t);
    if (it != d.end() && *it == t) throw std::domain_error("segment_of: point sits on a death");
    return offset_[s] + static_cast<std::uint32_t>(it - d.begin());
  }

  std::uint32_t segment_of(const SpaceTimePoint& p) const {
    if (!box_.contains(p.x, p.t)) throw std::out_of_range("ClusterPartition: point outside the box");
    return segment_of(box_.region.index(p.x), p.t);
  }

  std::uint32_t cluster_of(const SpaceTimePoint& p) const { return label_[segment_of(p)]; }

  bool communicates(const SpaceTimePoint& a, const SpaceTimePoint& b) const { return cluster_of(a) == cluster_of(b); }

  /// The cluster of p meets the horizontal or vertical boundary.
  bool reaches_boundary(const SpaceTimePoint& p) const { return boundary_[cluster_of(p)] != 0; }

  /// Some point of W1 communicates with some point of W2.
  bool connects(const std::vector<LinePiece>& w1, const std::vector<LinePiece>& w2) const {
    std::vector<std::uint32_t> a = clusters_meeting(w1), b = clusters_meeting(w2);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint32_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return !both.empty();
  }

 private:
  std::vector<std::uint32_t> clusters_meeting(const std::vector<LinePiece>& w) const {
    std::vector<std::uint32_t> out;
    for (const auto& p : w) {
      if (!box_.contains(p.x, p.a) || !box_.contains(p.x, p.b) || p.b < p.a)
        throw std::out_of_range("ClusterPartition: line piece outside the box");
      const std::size_t s = box_.region.index(p.x);
      const auto& d = deaths_[s];
      // segments overlapping [a, b]: from the one at a through the one at b
      const auto first = static_cast<std::uint32_t>(std::lower_bound(d.begin(), d.end(), p.a) - d.begin());
      const auto last = static_cast<std::uint32_t>(std::upper_bound(d.begin(), d.end(), p.b) - d.begin());
      for (std::uint32_t j = first; j <= last && j <= d.size(); ++j) out.push_back(label_[offset_[s] + j]);
    }
    return out;
  }

  SpaceTimeBox box_;
  std::vector<std::vector<double>> deaths_;
  std::vector<std::uint32_t> offset_;
  std::vector<std::uint32_t> label_;
  std::vector<char> boundary_;
  std::size_t k_ = 0;
};

inline ClusterPartition build_clusters(const Configuration& c) { return ClusterPartition(c); }

inline bool communicates(const ClusterPartition& p, const SpaceTimePoint& x, const SpaceTimePoint& y) {
  return p.communicates(x, y);
}

}  // namespace qpfk
