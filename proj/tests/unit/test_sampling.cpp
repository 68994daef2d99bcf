#include <gtest/gtest.h>

#include <cmath>

#include "qpfk/dynamics/system.hpp"
#include "qpfk/multiscale/diagnostics.hpp"
#include "qpfk/sampling/descriptor.hpp"
#include "qpfk/sampling/sampling_function.hpp"
#include "qpfk/sampling/transversality.hpp"

using namespace qpfk;

namespace {

Phase at(double turns) { return Phase::from_turns({turns}); }

}  // namespace

TEST(Sampling, StretchedProfileValues) {
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  EXPECT_EQ(h.eval(at(0.0)), 0.0);
  EXPECT_NEAR(h.log_eval(at(0.1)), -100.0, 1e-9);
  EXPECT_NEAR(h.log_eval(at(0.95)), -400.0, 1e-6);  // distance 0.05 across the wrap
  EXPECT_NEAR(h.log_eval(at(0.3)), 0.0, 1e-15);     // beyond r1: h_max = 1
  EXPECT_EQ(h.sup_norm(), 1.0);
  // the ramp increases monotonically from exp(-25) to h_max
  double prev = h.log_eval(at(0.2));
  for (double r = 0.201; r < 0.25; r += 0.001) {
    const double v = h.log_eval(at(r));
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Sampling, StretchedRejectsBadParameters) {
  EXPECT_THROW(make_stretched({at(0.0)}, -1.0), std::invalid_argument);
  EXPECT_THROW(make_stretched({at(0.0)}, 2.0, 1.0, 0.3, 0.2), std::invalid_argument);
  EXPECT_THROW(SamplingFunction({}, StretchedProfile{}), std::invalid_argument);
}

TEST(Sampling, PsiFVanishesOnZerosAndIsOneFarAway) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0), at(0.5)}, 0.5, sys);
  EXPECT_EQ(h.eval(at(0.0)), 0.0);
  EXPECT_EQ(h.eval(at(0.5)), 0.0);
  // distance 0.25 >= zeta(1) = 0.381...? no: zeta(1) = ||omega|| = 0.381966, so r = 0.25 is inside
  const double z1 = ZetaStaircase::for_system(sys).zeta_one();
  EXPECT_NEAR(z1, (3 - std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_LT(h.log_eval(at(0.25)), 0.0);
  // the profile increases with the distance to F
  EXPECT_LT(h.log_eval(at(0.001)), h.log_eval(at(0.01)));
  EXPECT_LT(h.log_eval(at(0.01)), h.log_eval(at(0.1)));
}

TEST(Sampling, PsiFRejectsXiAboveInverseDimension) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  EXPECT_THROW(make_psi_F({at(0.0)}, 1.0, sys), std::invalid_argument);
  EXPECT_THROW(make_psi_F({at(0.0)}, 0.0, sys), std::invalid_argument);
}

TEST(Sampling, ScaledAndNormalized) {
  const auto h = make_stretched({at(0.0)}, 2.0, 0.5);
  EXPECT_NEAR(h.sup_norm(), 0.5, 1e-15);
  EXPECT_NEAR(h.normalized().sup_norm(), 1.0, 1e-15);
  EXPECT_NEAR(h.scaled(4.0).eval(at(0.3)), 2.0, 1e-14);
  EXPECT_THROW(h.scaled(0.0), std::invalid_argument);
}

TEST(Transversality, PsiInverseMatchesScan) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_psi_F({at(0.0)}, 0.5, sys);
  const TransversalityProfile prof(h, ZetaStaircase::for_system(sys));
  for (double log_eps : {-2.0, -5.0, -10.0, -20.0}) {
    const auto k = prof.psi_inverse(log_eps);
    // largest k with Psi(k) >= eps, with Psi non-increasing
    ASSERT_GT(k, 0u);
    EXPECT_GE(prof.log_psi(k), log_eps);
    EXPECT_LT(prof.log_psi(k + 1), log_eps);
  }
}

TEST(Transversality, StretchedExponentEstimate) {
  const auto h = make_stretched({at(0.0)}, 2.0);
  // log|log h| / |log r| = 2 exactly below r0
  EXPECT_NEAR(transversality_exponent(h, at(0.0), {1e-2, 1e-3, 1e-4}), 2.0, 1e-9);
}

TEST(Transversality, CoveringRadiusOfRotation) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  // three-gap theorem: L = F_n orbit points leave a largest gap of ||F_{n-2} omega||
  const double r = covering_radius(sys, at(0.0), 8);
  double brute = 0;
  std::vector<double> pts;
  for (int x = 0; x < 8; ++x) pts.push_back(to_turns(sys.orbit_point(at(0.0), Site{x})[0]));
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) brute = std::max(brute, pts[i] - pts[i - 1]);
  brute = std::max(brute, 1.0 - pts.back() + pts.front());
  EXPECT_NEAR(r, brute / 2, 1e-15);
  EXPECT_LT(covering_radius(sys, at(0.0), covering_length(sys, at(0.0), 0.01)), 0.01);
}

TEST(Transversality, ResonanceMeasureOfStretched) {
  // mu{h < eps} = 2 r_eps with r_eps = (-log eps)^{-1/xi'}; with the box of
  // one site the resonance density is exactly this measure
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0);
  const double log_eps = -400.0;
  const auto d = resonance_density(h, sys, log_eps, 0, 200000, 3);
  const double exact = 2 * std::pow(400.0, -0.5);
  EXPECT_LE(std::abs(d.estimate.estimate - exact), 4 * d.estimate.std_error());
}

TEST(Descriptor, RoundTripAndErrors) {
  const auto sys = system_from_json(nlohmann::json::parse(R"({"kind": "rotation", "frequency": "golden"})"));
  EXPECT_TRUE(sys.is_circle_rotation());
  const auto again = system_from_json(system_to_json(sys));
  EXPECT_EQ(again.frequency()->angle(), sys.frequency()->angle());
  try {
    system_from_json(nlohmann::json::parse(R"({"kind": "mobius"})"));
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "system.kind");
  }
  try {
    sampling_from_json(nlohmann::json::parse(R"({"kind": "stretched", "zeros": [0.0]})"), sys);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "sampling.xi");
  }
  const auto h = sampling_from_json(nlohmann::json::parse(R"({"kind": "stretched", "zeros": [0.0], "xi": 2.0})"), sys);
  EXPECT_EQ(h.kind(), "stretched");
}

TEST(Descriptor, HEpsDeepensNearTheta0) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5);
  const auto he = make_h_eps(h, sys, at(0.0), 1e-3, 2.0, 4);
  // h_eps <= h everywhere and strictly below close to theta0
  for (double r : {0.3, 0.1, 0.01, 1e-4}) EXPECT_LE(he.log_eval(at(r)), h.log_eval(at(r)) + 1e-12);
  EXPECT_LT(he.log_eval(at(1e-4)), h.log_eval(at(1e-4)));
  EXPECT_THROW(make_h_eps(h, sys, at(0.3), 1e-3, 2.0), std::invalid_argument);
}
