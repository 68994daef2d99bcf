#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpfk {

inline constexpr int kMaxLatticeDim = 3;

/// A point of Z^d, d <= kMaxLatticeDim. Unused coordinates stay zero.
struct Site {
  std::array<std::int64_t, kMaxLatticeDim> c{};
  int dim = 1;

  Site() = default;
  explicit Site(std::int64_t x) : dim(1) { c[0] = x; }
  Site(std::initializer_list<std::int64_t> xs) : dim(static_cast<int>(xs.size())) {
    if (xs.size() == 0 || xs.size() > kMaxLatticeDim) throw std::invalid_argument("Site: bad dimension");
    std::copy(xs.begin(), xs.end(), c.begin());
  }
  static Site origin(int d) {
    if (d < 1 || d > kMaxLatticeDim) throw std::invalid_argument("Site: bad dimension");
    Site s;
    s.dim = d;
    return s;
  }

  std::int64_t operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  std::int64_t& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

  std::int64_t sup_norm() const {
    std::int64_t m = 0;
    for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(c[static_cast<std::size_t>(i)]));
    return m;
  }

  friend Site operator+(Site a, const Site& b) {
    for (int i = 0; i < a.dim; ++i) a[i] += b[i];
    return a;
  }
  friend Site operator-(Site a, const Site& b) {
    for (int i = 0; i < a.dim; ++i) a[i] -= b[i];
    return a;
  }
  friend bool operator==(const Site& a, const Site& b) { return a.dim == b.dim && a.c == b.c; }
  friend bool operator<(const Site& a, const Site& b) {
    for (int i = 0; i < std::min(a.dim, b.dim); ++i)
      if (a[i] != b[i]) return a[i] < b[i];
    return a.dim < b.dim;
  }

  std::string to_string() const {
    std::string s = "(";
    for (int i = 0; i < dim; ++i) s += (i ? "," : "") + std::to_string(c[static_cast<std::size_t>(i)]);
    return s + ")";
  }
};

/// An axis-aligned rectangle of Z^d with inclusive corners, sites indexed
/// in lexicographic order (last coordinate fastest).
class Region {
 public:
  Region() = default;
  Region(Site lo, Site hi) : lo_(lo), hi_(hi) {
    if (lo.dim != hi.dim) throw std::invalid_argument("Region: corner dimensions differ");
    for (int i = 0; i < lo.dim; ++i)
      if (hi[i] < lo[i]) throw std::invalid_argument("Region: empty extent");
  }

  /// Lambda_L(x) = { y : |y - x|_inf < L }, i.e. side 2L - 1.
  static Region ball(const Site& center, std::int64_t radius) {
    if (radius < 1) throw std::invalid_argument("Region::ball: radius must be >= 1");
    Site lo = center, hi = center;
    for (int i = 0; i < center.dim; ++i) {
      lo[i] -= radius - 1;
      hi[i] += radius - 1;
    }
    return Region(lo, hi);
  }

  /// { y : |y - x|_inf <= r }, side 2r + 1.
  static Region closed_ball(const Site& center, std::int64_t r) {
    if (r < 0) throw std::invalid_argument("Region::closed_ball: negative radius");
    return ball(center, r + 1);
  }

  int dim() const { return lo_.dim; }
  const Site& lo() const { return lo_; }
  const Site& hi() const { return hi_; }
  std::int64_t extent(int i) const { return hi_[i] - lo_[i] + 1; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int i = 0; i < dim(); ++i) n *= static_cast<std::size_t>(extent(i));
    return n;
  }

  bool contains(const Site& s) const {
    if (s.dim != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (s[i] < lo_[i] || s[i] > hi_[i]) return false;
    return true;
  }

  std::size_t index(const Site& s) const {
    if (!contains(s)) throw std::out_of_range("Region::index: site " + s.to_string() + " outside region");
    std::size_t idx = 0;
    for (int i = 0; i < dim(); ++i) idx = idx * static_cast<std::size_t>(extent(i)) + static_cast<std::size_t>(s[i] - lo_[i]);
    return idx;
  }

  Site site(std::size_t idx) const {
    Site s = lo_;
    for (int i = dim() - 1; i >= 0; --i) {
      const auto e = static_cast<std::size_t>(extent(i));
      s[i] = lo_[i] + static_cast<std::int64_t>(idx % e);
      idx /= e;
    }
    return s;
  }

  /// Sites with a nearest neighbour outside the region.
  bool on_boundary(const Site& s) const {
    for (int i = 0; i < dim(); ++i)
      if (s[i] == lo_[i] || s[i] == hi_[i]) return true;
    return false;
  }

  /// Nearest-neighbour pairs (a, b) with a < b by index.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    const std::size_t n = size();
    for (std::size_t a = 0; a < n; ++a) {
      const Site s = site(a);
      for (int i = 0; i < dim(); ++i) {
        if (s[i] == hi_[i]) continue;
        Site t = s;
        t[i] += 1;
        out.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(index(t)));
      }
    }
    return out;
  }

  friend bool operator==(const Region& a, const Region& b) { return a.lo_ == b.lo_ && a.hi_ == b.hi_; }

 private:
  Site lo_ = Site::origin(1);
  Site hi_ = Site::origin(1);
};

}  // namespace qpfk
