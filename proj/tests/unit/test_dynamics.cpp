#include <gtest/gtest.h>

#include <cmath>

#include "qpfk/dynamics/frequency.hpp"
#include "qpfk/dynamics/recurrence.hpp"
#include "qpfk/dynamics/system.hpp"

using namespace qpfk;

namespace {

// min_{1 <= x <= k} ||x omega|| by a running minimum
std::vector<double> brute_zeta(const Frequency& f, std::uint64_t k_max) {
  std::vector<double> z(k_max);
  double m = 0.5;
  for (std::uint64_t x = 1; x <= k_max; ++x) {
    m = std::min(m, circle_norm(static_cast<Angle>(x) * f.angle()));
    z[x - 1] = m;
  }
  return z;
}

long double dist_ld(long double x) {
  const long double f = x - std::floor(x);
  return std::min(f, 1.0L - f);
}

}  // namespace

TEST(Frequency, GoldenConvergentsAreFibonacci) {
  const auto f = Frequency::golden();
  std::uint64_t a = 1, b = 1;  // q_0 = 1, q_1 = 1
  EXPECT_EQ(f.convergent(1).q, 1u);
  for (std::size_t n = 2; n <= 40; ++n) {
    const auto c = a + b;
    a = b;
    b = c;
    EXPECT_EQ(f.convergent(n).q, b) << n;
  }
  EXPECT_NEAR(f.value(), (std::sqrt(5.0) - 1) / 2, 1e-16);
}

TEST(Frequency, Sqrt2AndPiValues) {
  EXPECT_NEAR(Frequency::sqrt2().value(), std::sqrt(2.0) - 1, 4e-16);
  EXPECT_NEAR(Frequency::pi_prefix(20).value(), M_PI - 3, 1e-15);
  EXPECT_EQ(Frequency::parse("1,2,3").convergent(3).q, 10u);  // [1,2,3]: q = 1, 3, 10
  EXPECT_THROW(Frequency::parse("1,,2"), std::invalid_argument);
  EXPECT_THROW(Frequency(std::vector<std::uint64_t>{1, 0}), std::invalid_argument);
}

TEST(Recurrence, ContinuedFractionZetaEqualsBruteForce) {
  for (const auto& f : {Frequency::golden(), Frequency::sqrt2()}) {
    const auto brute = brute_zeta(f, 10000);
    const long double w = f.value();
    for (std::uint64_t k = 1; k <= 10000; ++k) {
      ASSERT_EQ(zeta_rotation(f, k), brute[k - 1]) << k;
    }
    // independent long-double check at the plateau starts
    for (const auto q : convergent_denominators(f))
      if (q > 1 && q <= 10000) {
        EXPECT_NEAR(static_cast<double>(dist_ld(static_cast<long double>(q) * w)), zeta_rotation(f, q), 1e-12);
      }
  }
}

TEST(Recurrence, ConvergentLowerBound) {
  // ||q omega|| >= 1 / (4 q_{n+1}) for 0 < q < q_n
  for (const auto& f : {Frequency::golden(), Frequency::sqrt2(), Frequency::pi_prefix(40)}) {
    for (std::size_t n = 1; n <= 15; ++n) {
      const auto qn = f.convergent(n).q, qn1 = f.convergent(n + 1).q;
      if (qn > 2000000) break;
      for (std::uint64_t q = 1; q < qn; ++q)
        ASSERT_GE(circle_norm(static_cast<Angle>(q) * f.angle()), 1.0 / (4.0 * static_cast<double>(qn1))) << n << " " << q;
    }
  }
}

TEST(Recurrence, TableMatchesRotationFormula) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto t = build_recurrence_table(sys, 200, 64);
  for (int k = 1; k <= 200; ++k) {
    EXPECT_EQ(t.zeta_at(k), zeta_rotation(*sys.frequency(), static_cast<std::uint64_t>(k)));
    EXPECT_LE(t.zeta_hat_lower[static_cast<std::size_t>(k - 1)], t.zeta_hat_upper[static_cast<std::size_t>(k - 1)]);
  }
  EXPECT_THROW(build_recurrence_table(sys, 0), std::domain_error);
}

TEST(Recurrence, StaircaseStepsFollowZeta) {
  const auto f = Frequency::golden();
  const auto st = ZetaStaircase::from_frequency(f);
  for (std::uint64_t k = 1; k < 5000; k += 7) EXPECT_EQ(st.step(k), zeta_rotation(f, k)) << k;
  // the inverse is non-increasing in r
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 1e-6; r < st.zeta_one(); r *= 1.5) {
    const double v = st.inverse(r);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(System, RotationOrbit) {
  const auto f = Frequency::golden();
  const auto sys = DynamicalSystem::rotation(f);
  const Phase th = Phase::from_turns({0.25});
  const auto p = sys.orbit_point(th, Site{7});
  EXPECT_EQ(p[0], th[0] + 7 * f.angle());
  const auto m = sys.orbit_point(th, Site{-3});
  EXPECT_EQ(m[0], th[0] - 3 * f.angle());
}

TEST(System, SkewShiftOrbitMatchesIteration) {
  const auto f = Frequency::sqrt2();
  const auto sys = DynamicalSystem::skew_shift(f);
  const Phase th = Phase::from_turns({0.1, 0.7});
  Phase p = th;
  for (int k = 1; k <= 50; ++k) {
    // T(t1, t2) = (t1 + a, t2 + t1)
    p = [&] {
      Phase q = p;
      q[1] = p[1] + p[0];
      q[0] = p[0] + f.angle();
      return q;
    }();
    ASSERT_EQ(sys.orbit_point(th, Site{k}), p) << k;
  }
  // T^{-1}(T^1 theta) = theta
  EXPECT_EQ(sys.orbit_point(sys.orbit_point(th, Site{1}), Site{-1}), th);
}

TEST(System, TorusRotationRejectsTrivialGenerator) {
  EXPECT_THROW(DynamicalSystem::torus_rotation(1, 2, {0.3, 0.0}), std::invalid_argument);
  const auto s = DynamicalSystem::torus_rotation(2, 2, {0.3, 0.1, 0.2, 0.5});
  EXPECT_EQ(s.lattice_dim(), 2);
  EXPECT_EQ(s.phase_dim(), 2);
}

TEST(System, HaarPhasesAreUniform) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  Rng rng(1);
  int below = 0;
  for (int i = 0; i < 20000; ++i) below += to_turns(sys.sample_phase(rng)[0]) < 0.3;
  EXPECT_NEAR(below / 20000.0, 0.3, 0.015);
}
