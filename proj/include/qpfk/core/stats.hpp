#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qpfk {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Wilson score interval for a binomial proportion at normal quantile z.
inline Interval wilson_interval(double successes, double trials, double z = kZ95) {
  if (trials <= 0) return {0.0, 1.0};
  const double p = successes / trials;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / trials;
  const double center = (p + z2 / (2.0 * trials)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom;
  return {successes <= 0 ? 0.0 : std::max(0.0, center - half), successes >= trials ? 1.0 : std::min(1.0, center + half)};
}

/// Monte Carlo estimate of an event probability with a 95% Wilson interval.
/// For correlated (MCMC) samples `n_effective` replaces `trials` in the interval.
struct EstimateCI {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double n_effective = 0.0;
  std::uint64_t seed = 0;

  static EstimateCI from_counts(std::uint64_t successes, std::uint64_t trials, std::uint64_t seed) {
    EstimateCI e;
    e.successes = successes;
    e.trials = trials;
    e.seed = seed;
    e.n_effective = static_cast<double>(trials);
    e.estimate = trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
    const auto w = wilson_interval(static_cast<double>(successes), static_cast<double>(trials));
    e.ci_lo = std::min(w.lo, e.estimate);
    e.ci_hi = std::max(w.hi, e.estimate);
    return e;
  }

  /// Wilson interval at an arbitrary z, on the effective sample size.
  Interval interval(double z) const {
    return wilson_interval(estimate * n_effective, n_effective, z);
  }

  /// Binomial standard error at the point estimate.
  double std_error() const {
    return n_effective > 0 ? std::sqrt(estimate * (1.0 - estimate) / n_effective) : 1.0;
  }
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Effective sample size of a single chain, Geyer initial positive sequence.
inline double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(xs);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (xs[i] - m) * (xs[i + lag] - m);
    return s / static_cast<double>(n);
  };
  double tau = 1.0;
  const std::size_t max_lag = std::min<std::size_t>(n - 2, 5000);
  for (std::size_t lag = 1; lag + 1 <= max_lag; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

/// Split-chain potential scale reduction factor. Chains of constant value
/// (zero within and between variance) report 1.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) continue;
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(h), c.begin() + static_cast<std::ptrdiff_t>(2 * h));
  }
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    w += variance(h);
  }
  w /= static_cast<double>(halves.size());
  const double b = n * variance(means);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
};

/// Weighted least squares y = a + b x with weights 1/sigma^2; slope_se is
/// the standard error implied by the given sigmas.
inline LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y,
                                     std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2)
    throw std::invalid_argument("weighted_linear_fit: need at least two matching points");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (det <= 0) throw std::invalid_argument("weighted_linear_fit: degenerate abscissae");
  LinearFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  fit.slope_se = std::sqrt(sw / det);
  return fit;
}

/// log(exp(a) - exp(b)) for a >= b.
inline double log_diff_exp(double a, double b) {
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(-std::exp(b - a));
}

}  // namespace qpfk
