#include <gtest/gtest.h>

#include <cmath>

#include "qpfk/dynamics/system.hpp"
#include "qpfk/multiscale/diagnostics.hpp"
#include "qpfk/multiscale/exponents.hpp"
#include "qpfk/sampling/sampling_function.hpp"

using namespace qpfk;

namespace {

Phase at(double turns) { return Phase::from_turns({turns}); }

MsaBudget budget(std::uint64_t n, std::uint64_t seed = 1) {
  MsaBudget b;
  b.n_samples = n;
  b.seed = seed;
  return b;
}

}  // namespace

TEST(Exponents, MidpointsInOneDimension) {
  // D = 0.4, alpha bound 1 / 0.4 = 2.5, alpha = 2.5 + 0.2 / 0.4 = 3
  const auto e = feasible_exponents(1, 0.2, 0.8);
  EXPECT_NEAR(e.alpha, 3.0, 1e-12);
  EXPECT_NEAR(e.kappa, 1.5, 1e-12);   // (1.4, 1.6)
  EXPECT_NEAR(e.gamma, 0.85, 1e-12);  // (0.8, 2.4 - kappa)
  EXPECT_NEAR(e.tau, 0.85, 1e-12);    // (0.8, kappa - 0.6)
  EXPECT_FALSE(verify_exponents(e).has_value());
}

TEST(Exponents, InfeasibleInputsNameTheConstraint) {
  try {
    feasible_exponents(1, 1.0, 0.9);
    FAIL() << "expected InfeasibleExponents";
  } catch (const InfeasibleExponents& ex) {
    EXPECT_EQ(ex.constraint(), "xi < 1/d");
  }
  EXPECT_THROW(feasible_exponents(1, 0.5, 0.7), InfeasibleExponents);  // nu <= 0.75
  EXPECT_THROW(feasible_exponents(1, 0.2, 1.0), InfeasibleExponents);
  EXPECT_THROW(feasible_exponents(0, 0.2, 0.8), InfeasibleExponents);
}

TEST(Exponents, TwoDimensionsPassVerifier) {
  const auto e = feasible_exponents(2, 0.1, 0.9);
  EXPECT_FALSE(verify_exponents(e).has_value());
  EXPECT_GT(e.alpha, 2.0);
}

TEST(Exponents, VerifierFlagsEachViolation) {
  auto e = feasible_exponents(1, 0.2, 0.8);
  auto bad = e;
  bad.tau = e.nu;
  EXPECT_EQ(verify_exponents(bad).value(), "tau > nu");
  bad = e;
  bad.gamma = 10;
  EXPECT_EQ(verify_exponents(bad).value(), "gamma < alpha*nu-kappa*d");
  bad = e;
  bad.alpha = 2.4;
  EXPECT_TRUE(verify_exponents(bad).has_value());
}

TEST(Schedule, MassBookkeepingIsExact) {
  const auto e = feasible_exponents(1, 0.2, 0.8);
  const auto s = make_schedule(e, 8, 0.25, 1);
  ASSERT_EQ(s.L.size(), 2u);
  EXPECT_EQ(s.L[0], 8);
  EXPECT_EQ(s.L[1], 512);  // 8^3
  EXPECT_EQ(s.m[1], 0.25 - std::pow(8.0, -e.tau));
  EXPECT_EQ(s.eps_log[0], -std::pow(8.0, e.gamma));
  EXPECT_EQ(s.T_log[1], std::pow(512.0, e.nu));
  EXPECT_LT(s.m_inf, s.m[1]);
  const auto k = make_schedule(e, 8, 0.25, 1, MassDecrement::kappa);
  EXPECT_EQ(k.m[1], 0.25 - std::pow(8.0, -e.kappa));
  EXPECT_THROW(make_schedule(e, 8, 0.25, 6), std::overflow_error);
  EXPECT_THROW(make_schedule(e, 1, 0.25, 1), std::invalid_argument);
}

TEST(Regularity, HeightAndComparison) {
  const auto h = height_for(4, 0.5, 700);
  EXPECT_EQ(h.T_log, 2.0);
  EXPECT_FALSE(h.truncated);
  const auto t = height_for(1 << 20, 0.9, 700);
  EXPECT_EQ(t.T_log, 700.0);
  EXPECT_TRUE(t.truncated);
  EXPECT_EQ(compare_log(-5, -3, -2), Verdict::regular);
  EXPECT_EQ(compare_log(-1, -0.5, -2), Verdict::singular);
  EXPECT_EQ(compare_log(-3, -1, -2), Verdict::undecided);
}

TEST(Regularity, ZeroLambdaAgainstAnalyticEscape) {
  const std::int64_t L = 2;
  const double nu = 0.5, delta = 0.5;
  const double T = std::exp(std::pow(2.0, nu));
  const double p = 2 * std::exp(-delta * T) - std::exp(-2 * delta * T);
  const auto env = Environment::constant(Region::ball(Site{0}, L), delta, 0.0);
  for (double m : {0.0, 0.2, 2.0}) {
    const auto r = is_regular(env, Site{0}, m, L, nu, budget(20000));
    const Verdict analytic = p < std::exp(-m * L) ? Verdict::regular : Verdict::singular;
    EXPECT_EQ(r.verdict, analytic) << "m=" << m << " p=" << p;
  }
}

TEST(Regularity, NoDeathsIsSingular) {
  const auto env = Environment::constant(Region::ball(Site{0}, 3), 0.0, 1.0);
  EXPECT_EQ(is_regular(env, Site{0}, 0.1, 3, 0.5, budget(2000)).verdict, Verdict::singular);
}

TEST(Simplicity, VacuousCases) {
  const std::int64_t L = 2;
  const Region scan = Region::closed_ball(Site{0}, 3);
  const Region cover = Region::closed_ball(Site{0}, 3 + L);
  // every box resonant
  const auto weak = Environment::constant(cover, 0.0, 1.0);
  const auto all = simplicity_audit(weak, scan, 0.5, L, 0.5, 1.0, budget(1000));
  EXPECT_EQ(all.verdict, "holds");
  EXPECT_EQ(all.resonant_boxes, scan.size());
  // no singular sites: high death rate, no bonds
  const auto strong = Environment::constant(cover, 20.0, 0.0);
  const auto none = simplicity_audit(strong, scan, 0.5, L, 0.5, -100.0, budget(1000));
  EXPECT_EQ(none.verdict, "holds");
  EXPECT_EQ(none.regular, scan.size());
  // singular without resonance: violated with a witness
  const auto barely = Environment::constant(cover, 1e-3, 1.0);
  const auto bad = simplicity_audit(barely, scan, 0.5, L, 0.5, -100.0, budget(500));
  EXPECT_EQ(bad.verdict, "violated");
  ASSERT_TRUE(bad.witness.has_value());
  EXPECT_TRUE(scan.contains(*bad.witness));
}

TEST(LambdaSearch, ResultPassesOnReestimation) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5, 1.0).scaled(100.0);
  const auto theta = at(0.5);
  const double m1 = 0.5, nu = 0.8;
  const std::int64_t L1 = 4;
  const auto r = initial_lambda_search(h, sys, theta, m1, L1, nu, 0.05, budget(4000, 3));
  ASSERT_GT(r.lambda, 0.0);
  EXPECT_LT(std::log(r.estimate.interval(3.0).hi), r.log_threshold);
  // independent estimate at the returned lambda and at half of it
  const auto box = SpaceTimeBox::cylinder(Site{0}, L1, std::exp(std::pow(4.0, nu)));
  const auto env = Environment::constant(box.region, r.delta_min, r.lambda);
  const auto check = estimate_event(env, box, Event::escape(Site{0}), 4000, 99);
  EXPECT_LT(check.estimate - 3 * check.std_error(), std::exp(r.log_threshold));
  const auto half = coupled_escape(box, r.delta_min, r.lambda, {0.5 * r.lambda, r.lambda}, 2000, 5, 1);
  EXPECT_LE(half[0].successes, half[1].successes);
}

TEST(LambdaSearch, ZeroLambdaPassesWhenAnalyticEscapeIsBelowThreshold) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5, 1.0).scaled(100.0);
  const auto theta = at(0.5);
  const std::int64_t L1 = 3;
  const double nu = 0.8, m1 = 0.2;
  const auto box = SpaceTimeBox::cylinder(Site{0}, L1, std::exp(std::pow(3.0, nu)));
  const auto r = initial_lambda_search(h, sys, theta, m1, L1, nu, 0.1, budget(4000, 4));
  const double dT = r.delta_min * box.t_hi;
  const double analytic = 2 * std::exp(-dT) - std::exp(-2 * dT);
  ASSERT_LT(analytic, std::exp(-m1 * L1));
  EXPECT_GT(r.lambda, 1e-12);
}

TEST(LambdaSearch, ResonantPhaseRejected) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  EXPECT_THROW(initial_lambda_search(h, sys, at(0.0), 0.5, 4, 0.8, 0.05, budget(100)), std::domain_error);
}

TEST(ResonanceDensity, TrivialThresholds) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(resonance_density(h, sys, ninf, 3, 2000, 1).estimate.estimate, 0.0);
  EXPECT_EQ(resonance_density(h, sys, std::log(h.sup_norm()) + 0.1, 3, 2000, 1).estimate.estimate, 1.0);
}

TEST(ResonanceDensity, BelowKacBound) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0)}, 0.5, sys);
  for (double k : {100.0, 400.0}) {
    const double log_eps = 1 - std::pow(k, 0.5);
    for (std::int64_t L : {2, 8}) {
      const auto d = resonance_density(h, sys, log_eps, L, 100000, 7);
      EXPECT_LE(d.estimate.estimate, d.bound + 4 * d.estimate.std_error()) << "k=" << k << " L=" << L;
      EXPECT_GT(d.psi_inverse, 0u);
    }
  }
}

TEST(ResonanceScan, MatchesBruteForce) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0)}, 0.5, sys);
  const double log_eps = -8.0;
  const auto theta = at(0.123);
  const auto s = resonance_scan(h, sys, theta, log_eps, 50, 2000);
  std::size_t n = 0;
  for (std::int64_t x = -2000; x <= 2000; ++x) n += h.log_eval(sys.orbit_point(theta, Site{x})) < log_eps;
  EXPECT_EQ(s.resonant.size(), n);
  for (std::size_t i = 1; i < s.resonant.size(); ++i)
    EXPECT_GE(std::abs(s.resonant[i][0] - s.resonant[i - 1][0]), s.min_separation);
  if (!s.resonant.empty()) {
    EXPECT_GE(s.max_per_window, 1u);
  }
}

TEST(ResonanceScan, WindowCountsMatchSlidingWindow) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0)}, 0.5, sys);
  const auto theta = at(0.37);
  const auto s = resonance_scan(h, sys, theta, -2.0, 10, 3000);
  std::vector<std::int64_t> xs;
  for (std::int64_t x = -3000; x <= 3000; ++x)
    if (h.log_eval(sys.orbit_point(theta, Site{x})) < -2.0) xs.push_back(x);
  ASSERT_GT(xs.size(), 5u);
  for (std::int64_t w : {1, 2, 10, 17, 100, 1000}) {
    std::size_t best = 0;
    for (std::size_t i = 0, j = 0; i < xs.size(); ++i) {
      while (j < xs.size() && xs[j] - xs[i] < w) ++j;
      best = std::max(best, j - i);
    }
    EXPECT_EQ(s.max_in_window(w), best) << "w=" << w;
  }
  EXPECT_EQ(s.max_per_window, s.max_in_window(10));
}

TEST(Decay, FitOnSyntheticRows) {
  DecayScan s;
  for (std::int64_t L : {8, 16, 32}) {
    const double le = 1.0 - 0.5 * static_cast<double>(L);
    s.rows.push_back({L, 1.0, false, std::exp(le), 0.1 * std::exp(le), le, 0.1, 100});
  }
  fit_decay(s, 1.96);
  EXPECT_TRUE(s.fitted);
  EXPECT_TRUE(s.decaying);
  EXPECT_NEAR(s.fit.slope, -0.5, 1e-12);
  s.rows[1].log_estimate = -std::numeric_limits<double>::infinity();
  fit_decay(s, 1.96);
  EXPECT_FALSE(s.fitted);
  EXPECT_FALSE(s.decaying);
}

TEST(Decay, ZeroLambdaRowMatchesAnalytic) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  const auto theta = at(0.37);
  DecayOptions direct;
  direct.method = DecayEstimator::direct;
  const auto r = decay_row(h, sys, theta, 0.0, 3, 0.5, budget(20000), direct, 5);
  const double d0 = h.eval(sys.orbit_point(theta, Site{0}));
  const double T = std::exp(std::pow(3.0, 0.5));
  const double p = 2 * std::exp(-d0 * T) - std::exp(-2 * d0 * T);
  EXPECT_NEAR(r.estimate, p, 3 * std::sqrt(p * (1 - p) / 20000));
  const auto split = decay_row(h, sys, theta, 0.0, 3, 0.5, budget(20000), DecayOptions{}, 5);
  EXPECT_NEAR(split.estimate, p, 3 * split.std_error + 1e-9);
}

TEST(MsaDiagnostic, ScaleZeroReport) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0)}, 0.5, sys);
  const auto e = feasible_exponents(1, 0.5, 0.9);
  MsaDiagnosticBudget b;
  b.mc = budget(500);
  b.n_theta = 5000;
  b.audit_half_width = 2;
  const auto rep = run_msa_diagnostic(h, sys, at(0.3), 0.01, e, 8, 0.25, 0, b);
  ASSERT_EQ(rep.scales.size(), 1u);
  const auto& s0 = rep.scales[0];
  EXPECT_EQ(s0.L, 8);
  ASSERT_TRUE(s0.windows.has_value());
  EXPECT_LE(s0.windows->max_per_window, h.zeros().size());
  EXPECT_EQ(s0.max_per_kappa_window, s0.windows->max_in_window(static_cast<std::int64_t>(std::round(std::pow(8.0, e.kappa)))));
  EXPECT_EQ(s0.max_per_box_window, s0.windows->max_in_window(17));
  ASSERT_TRUE(s0.simplicity.has_value());
  EXPECT_NE(s0.simplicity->verdict, "violated");
  EXPECT_NO_THROW(rep.to_json().dump());
}
