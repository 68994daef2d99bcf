#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "qpfk/core/lattice.hpp"
#include "qpfk/dynamics/system.hpp"
#include "qpfk/sampling/sampling_function.hpp"

namespace qpfk {

/// Death rates delta(x) on a finite region, the bond rate lambda and the
/// cluster weight q. log_delta is kept alongside delta because fields near
/// zeros of h underflow doubles long before they stop mattering.
struct Environment {
  Region region;
  std::vector<double> delta;
  std::vector<double> log_delta;
  double lambda = 0.0;
  double q = 1.0;

  static Environment constant(const Region& region, double delta, double lambda, double q = 1.0) {
    Environment e;
    e.region = region;
    e.delta.assign(region.size(), delta);
    e.log_delta.assign(region.size(), std::log(delta));
    e.lambda = lambda;
    e.q = q;
    e.validate();
    return e;
  }

  static Environment from_field(const Region& region, std::vector<double> delta, double lambda, double q = 1.0) {
    Environment e;
    e.region = region;
    e.delta = std::move(delta);
    for (double d : e.delta) e.log_delta.push_back(std::log(d));
    e.lambda = lambda;
    e.q = q;
    e.validate();
    return e;
  }

  /// delta(x) = h(T^x theta) on the region.
  static Environment from_sampling(const SamplingFunction& h, const DynamicalSystem& sys, const Phase& theta,
                                   const Region& region, double lambda, double q = 1.0) {
    Environment e;
    e.region = region;
    for (std::size_t i = 0; i < region.size(); ++i) {
      const double lh = h.log_eval(sys.orbit_point(theta, region.site(i)));
      e.log_delta.push_back(lh);
      e.delta.push_back(std::exp(lh));
    }
    e.lambda = lambda;
    e.q = q;
    e.validate();
    return e;
  }

  void validate() const {
    if (delta.size() != region.size()) throw std::invalid_argument("Environment: field size does not match region");
    for (double d : delta)
      if (!(d >= 0) || !std::isfinite(d)) throw std::invalid_argument("Environment: death rates must be finite and non-negative");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw std::invalid_argument("Environment: lambda must be finite and non-negative");
    if (!(q >= 1)) throw std::invalid_argument("Environment: only q >= 1 is supported");
  }

  double at(const Site& x) const { return delta[region.index(x)]; }
  double log_at(const Site& x) const { return log_delta[region.index(x)]; }

  Environment with_lambda(double l) const {
    auto e = *this;
    e.lambda = l;
    e.validate();
    return e;
  }

  /// FNV-1a over the field bits; identifies the field in output rows.
  std::uint64_t field_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (double d : log_delta) mix(&d, sizeof d);
    const auto lo = region.lo(), hi = region.hi();
    mix(lo.c.data(), sizeof(std::int64_t) * lo.c.size());
    mix(hi.c.data(), sizeof(std::int64_t) * hi.c.size());
    return h;
  }
};

}  // namespace qpfk
