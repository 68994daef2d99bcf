#include <gtest/gtest.h>

#include <cmath>

#include "qpfk/percolation/clusters.hpp"
#include "qpfk/percolation/configuration.hpp"
#include "qpfk/percolation/estimate.hpp"

using namespace qpfk;

namespace {

Region line(std::int64_t lo, std::int64_t hi) { return Region(Site{lo}, Site{hi}); }

// |estimate - p| within z binomial standard errors at p
void expect_binomial(const EstimateCI& e, double p, double z = 3.0) {
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(e.trials));
  EXPECT_NEAR(e.estimate, p, z * se + 1e-12) << "expected " << p;
}

}  // namespace

TEST(Sample, ZeroRatesGiveEmptyConfiguration) {
  const SpaceTimeBox box(line(-2, 2), -1, 1);
  const auto env = Environment::constant(box.region, 0.0, 0.0);
  Rng rng(1);
  const auto c = sample_configuration(env, box, rng);
  EXPECT_EQ(c.total_deaths(), 0u);
  EXPECT_EQ(c.total_bonds(), 0u);
}

TEST(Sample, DeathCountIsPoisson) {
  const SpaceTimeBox box(line(0, 0), 0, 10);
  const auto env = Environment::constant(box.region, 2.0, 0.0);
  Rng rng(2);
  const int n = 10000;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const auto c = sample_configuration(env, box, rng);
    c.validate();
    s += static_cast<double>(c.total_deaths());
  }
  EXPECT_NEAR(s / n, 20.0, 3 * std::sqrt(20.0 / n));
}

TEST(Sample, BondVoidProbability) {
  const SpaceTimeBox box(line(0, 1), 0, 1);
  const auto env = Environment::constant(box.region, 0.0, 1.0);
  Rng rng(3);
  const int n = 10000;
  int empty = 0;
  for (int i = 0; i < n; ++i) empty += sample_configuration(env, box, rng).total_bonds() == 0;
  const double p = std::exp(-1.0);
  EXPECT_NEAR(static_cast<double>(empty) / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Clusters, CountsSegmentsAndMerges) {
  const SpaceTimeBox box(line(-2, 2), 0, 1);
  auto c = Configuration::empty(box);
  EXPECT_EQ(build_clusters(c).num_clusters(), 5u);
  c.deaths[2] = {0.5};
  EXPECT_EQ(build_clusters(c).num_clusters(), 6u);
  c.deaths[2].clear();
  c.bonds[0] = {0.3};
  EXPECT_EQ(build_clusters(c).num_clusters(), 4u);
}

TEST(Clusters, Communication) {
  const SpaceTimeBox box(line(0, 2), 0, 1);
  auto c = Configuration::empty(box);
  c.deaths[1] = {0.0};
  const auto p = build_clusters(c);
  const SpaceTimePoint a{Site{0}, 0.25}, b{Site{0}, 0.75}, far{Site{2}, 0.5};
  EXPECT_TRUE(communicates(p, a, a));
  EXPECT_TRUE(communicates(p, a, b));
  EXPECT_FALSE(communicates(p, a, far));
}

TEST(Clusters, BondJoinsOnlyItsSegment) {
  const SpaceTimeBox box(line(0, 1), 0, 1);
  auto c = Configuration::empty(box);
  c.deaths[0] = {0.0 + 0.4};
  c.bonds[0] = {0.5};
  c.validate();
  const auto p = build_clusters(c);
  EXPECT_EQ(p.num_clusters(), 2u);
  EXPECT_TRUE(p.communicates({Site{0}, 0.9}, {Site{1}, 0.1}));
  EXPECT_FALSE(p.communicates({Site{0}, 0.2}, {Site{1}, 0.1}));
  EXPECT_THROW(p.segment_of({Site{0}, 0.4}), std::domain_error);
  EXPECT_THROW(p.segment_of({Site{0}, 1.5}), std::out_of_range);
}

TEST(Clusters, ConnectSets) {
  const SpaceTimeBox box(line(0, 2), 0, 1);
  auto c = Configuration::empty(box);
  c.deaths[1] = {0.5};
  c.bonds[0] = {0.2};
  c.bonds[1] = {0.8};
  const auto p = build_clusters(c);
  EXPECT_FALSE(p.connects({{Site{0}, 0, 1}}, {{Site{2}, 0, 1}}));
  EXPECT_TRUE(p.connects({{Site{0}, 0, 1}}, {{Site{1}, 0.0, 0.4}}));
  EXPECT_TRUE(p.connects({{Site{1}, 0.45, 0.55}}, {{Site{2}, 0.9, 1}}));
}

TEST(Configuration, ValidateRejectsBadLists) {
  const SpaceTimeBox box(line(0, 1), 0, 1);
  auto c = Configuration::empty(box);
  c.deaths[0] = {0.5, 0.2};
  EXPECT_THROW(c.validate(), std::logic_error);
  c.deaths[0] = {0.5};
  c.bonds[0] = {0.5};
  EXPECT_THROW(c.validate(), std::logic_error);
  c.bonds[0] = {1.5};
  EXPECT_THROW(c.validate(), std::logic_error);
}

TEST(Configuration, JsonRoundTrip) {
  const auto box = SpaceTimeBox::cylinder(Site{0, 0}, 2, 1.5);
  const auto env = Environment::constant(box.region, 0.7, 1.3);
  Rng rng(4);
  const auto c = sample_configuration(env, box, rng);
  const auto back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
  EXPECT_EQ(back, c);
}

TEST(Estimate, EscapeAtZeroLambda) {
  const double delta = 0.8, T = 1.1;
  const auto box = SpaceTimeBox::cylinder(Site{0}, 3, T);
  const auto env = Environment::constant(box.region, delta, 0.0);
  const double p = 2 * std::exp(-delta * T) - std::exp(-2 * delta * T);
  for (auto kind : {SamplerKind::lazy, SamplerKind::eager})
    expect_binomial(estimate_event(env, box, Event::escape(Site{0}), 20000, 11, 1, kind), p);
}

TEST(Estimate, SameLineConnection) {
  const double delta = 1.3, t = 0.6;
  const auto box = SpaceTimeBox::cylinder(Site{0}, 2, 1.0);
  const auto env = Environment::constant(box.region, delta, 0.0);
  const auto ev = Event::connect({Site{0}, -0.2}, {Site{0}, -0.2 + t});
  for (auto kind : {SamplerKind::lazy, SamplerKind::eager})
    expect_binomial(estimate_event(env, box, ev, 20000, 12, 1, kind), std::exp(-delta * t));
}

TEST(Estimate, EdgeConnectionWithoutDeaths) {
  const double lambda = 0.4, T = 0.5;
  const SpaceTimeBox box(line(0, 1), -T, T);
  const auto env = Environment::constant(box.region, 0.0, lambda);
  const auto ev = Event::connect({Site{0}, 0.0}, {Site{1}, 0.0});
  for (auto kind : {SamplerKind::lazy, SamplerKind::eager})
    expect_binomial(estimate_event(env, box, ev, 20000, 13, 1, kind), 1 - std::exp(-2 * T * lambda));
}

TEST(Estimate, LazyAndEagerAgreeOnGeneralBox) {
  const auto box = SpaceTimeBox::cylinder(Site{0, 0}, 3, 1.5);
  const auto env = Environment::constant(box.region, 1.0, 1.2);
  const auto ev = Event::escape(Site{0, 0});
  const auto a = estimate_event(env, box, ev, 10000, 21, 1, SamplerKind::lazy);
  const auto b = estimate_event(env, box, ev, 10000, 22, 1, SamplerKind::eager);
  EXPECT_NEAR(a.estimate, b.estimate, 3 * std::hypot(a.std_error(), b.std_error()));
}

TEST(Estimate, WorkerCountDoesNotChangeResult) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 4, 2.0);
  const auto env = Environment::constant(box.region, 1.0, 0.9);
  const auto ev = Event::escape(Site{0});
  const auto one = estimate_event(env, box, ev, 3000, 5, 1);
  for (unsigned w : {2u, 4u, 8u}) EXPECT_EQ(estimate_event(env, box, ev, 3000, 5, w).successes, one.successes);
}

TEST(Estimate, LambdaSweepIsMonotonePerSample) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 4, 2.0);
  const auto env = Environment::constant(box.region, 1.0, 0.0);
  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  const auto s = estimate_lambda_sweep(env, box, Event::escape(Site{0}), grid, 2000, 6);
  for (const auto& row : s.indicators)
    for (std::size_t j = 1; j < row.size(); ++j) EXPECT_LE(row[j - 1], row[j]);
  const double p0 = 2 * std::exp(-2.0) - std::exp(-4.0);
  expect_binomial(s.estimates[0], p0);
  EXPECT_THROW(estimate_lambda_sweep(env, box, Event::escape(Site{0}), {1.0, 0.5}, 10, 1), std::invalid_argument);
}

TEST(Estimate, SplittingMatchesDirect) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 4, 3.0);
  const auto env = Environment::constant(box.region, 1.0, 0.3);
  const auto direct = estimate_event(env, box, Event::escape(Site{0}), 40000, 31);
  const auto split = escape_splitting(env, box, Site{0}, 400, 20, 32);
  EXPECT_NEAR(split.estimate, direct.estimate, 3 * std::hypot(split.std_error, direct.std_error()));
}

TEST(Coupling, IdenticalEnvironmentsGiveIdenticalConfigurations) {
  const auto box = SpaceTimeBox::cylinder(Site{0, 0}, 2, 1.0);
  const auto env = Environment::constant(box.region, 0.9, 1.1);
  const auto [lo, hi] = monotone_coupled_pair(env, env, box, 8);
  EXPECT_EQ(lo, hi);
}

TEST(Coupling, ThinnedDeathsAreSubset) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 3, 2.0);
  const auto lo_env = Environment::constant(box.region, 2.0, 0.5);
  const auto hi_env = Environment::constant(box.region, 1.0, 0.5);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto [lo, hi] = monotone_coupled_pair(lo_env, hi_env, box, s);
    EXPECT_TRUE(config_leq(lo, hi));
    for (std::size_t i = 0; i < hi.deaths.size(); ++i)
      EXPECT_TRUE(std::includes(lo.deaths[i].begin(), lo.deaths[i].end(), hi.deaths[i].begin(), hi.deaths[i].end()));
  }
}

TEST(Coupling, CommunicationIsMonotone) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 3, 1.0);
  std::vector<double> d_lo(box.region.size()), d_hi(box.region.size());
  for (std::size_t i = 0; i < d_lo.size(); ++i) {
    d_lo[i] = 1.0 + 0.3 * static_cast<double>(i);
    d_hi[i] = 0.5 * d_lo[i];
  }
  const auto lo_env = Environment::from_field(box.region, d_lo, 0.6);
  const auto hi_env = Environment::from_field(box.region, d_hi, 1.4);
  const SpaceTimePoint a{Site{-2}, -0.3}, b{Site{2}, 0.4};
  int lo_hits = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto [lo, hi] = monotone_coupled_pair(lo_env, hi_env, box, s);
    const bool c_lo = build_clusters(lo).communicates(a, b);
    lo_hits += c_lo;
    if (c_lo) {
      ASSERT_TRUE(build_clusters(hi).communicates(a, b)) << "seed " << s;
    }
  }
  EXPECT_GT(lo_hits, 0);
}

TEST(Coupling, RejectsMisorderedEnvironments) {
  const auto box = SpaceTimeBox::cylinder(Site{0}, 2, 1.0);
  const auto a = Environment::constant(box.region, 1.0, 1.0);
  EXPECT_THROW(monotone_coupled_pair(a, a.with_lambda(0.5), box, 1), std::invalid_argument);
  EXPECT_THROW(monotone_coupled_pair(a, Environment::constant(box.region, 2.0, 1.0), box, 1), std::invalid_argument);
  auto q2 = a;
  q2.q = 2.0;
  EXPECT_THROW(monotone_coupled_pair(q2, q2, box, 1), std::invalid_argument);
}

TEST(Environment, RejectsInvalidRates) {
  const Region r = line(0, 1);
  EXPECT_THROW(Environment::constant(r, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Environment::constant(r, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(Environment::constant(r, 1.0, 1.0, 0.5), std::invalid_argument);
}
