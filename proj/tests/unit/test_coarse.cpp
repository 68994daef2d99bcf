#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qpfk/coarse/coarse.hpp"
#include "qpfk/dynamics/system.hpp"

using namespace qpfk;

namespace {

Phase at(double turns) { return Phase::from_turns({turns}); }

// a d = 1 lattice of n blocks x n layers, every coarse site and bond drawn
// with probability p
CoarseLattice iid_lattice(std::int64_t n, double p, std::uint64_t seed) {
  CoarseLattice g;
  g.d = 1;
  g.L = 1;
  g.extent = {n, n};
  for (std::int64_t b = 0; b < n; ++b) g.blocks.push_back({Site{b}, Site{b}, 0.0, 0.0});
  for (std::int64_t b = 0; b + 1 < n; ++b)
    g.pairs.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b + 1), 0.0, 0.0, p});
  const auto nb = static_cast<std::size_t>(n), np = g.pairs.size(), nl = static_cast<std::size_t>(n);
  Rng rng(seed);
  g.site_open.resize(nb * nl);
  for (auto& s : g.site_open) s = uniform01(rng) < p;
  g.space_open.resize(np * nl);
  for (std::size_t k = 0; k < nl; ++k)
    for (std::size_t i = 0; i < np; ++i)
      g.space_open[k * np + i] = uniform01(rng) < p && g.site_open[k * nb + g.pairs[i].a] && g.site_open[k * nb + g.pairs[i].b];
  g.time_open.resize(nb * (nl - 1));
  for (std::size_t k = 0; k + 1 < nl; ++k)
    for (std::size_t b = 0; b < nb; ++b)
      g.time_open[k * nb + b] = uniform01(rng) < p && g.site_open[k * nb + b] && g.site_open[(k + 1) * nb + b];
  return g;
}

}  // namespace

TEST(CoarseFormulas, SiteOccupation) {
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(site_occupation_prob(ninf, 10.0), 1.0);
  EXPECT_NEAR(site_occupation_prob(std::log(std::log(2.0)), 0.0), 0.5, 1e-15);
  // log delta = -16^2, T_log = 16^1.2: exp(-exp(16^1.2 - 256)) = 1 to double precision
  const double p = site_occupation_prob(-256.0, std::pow(16.0, 1.2));
  EXPECT_GT(p, 1 - 1e-15);
  EXPECT_NEAR(log_site_occupation_prob(-256.0, std::pow(16.0, 1.2)), -std::exp(std::pow(16.0, 1.2) - 256.0), 1e-300);
}

TEST(CoarseFormulas, SliceBound) {
  const auto b = slice_bond_prob_bound(4, 1, 1.0, 1.0);
  EXPECT_NEAR(b.log_p, 20 * std::log(1 - std::exp(-1.0)) - 20.0, 1e-12);
  EXPECT_NEAR(std::exp(b.log_p), std::pow(1 - std::exp(-1.0), 20) * std::exp(-20.0), 1e-22);
  EXPECT_NEAR(b.c, -b.log_p / 4, 1e-15);
  EXPECT_GT(std::exp(slice_bond_prob_bound(4, 1, 50.0, 0.0).log_p), 1 - 1e-15);
  double prev = -INFINITY;
  for (double l : {0.1, 0.5, 1.0, 2.0, 8.0}) {
    const double v = slice_bond_prob_bound(3, 2, l, 0.5).log_p;
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_THROW(slice_bond_prob_bound(0, 1, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(slice_bond_prob_bound(4, 1, 0.0, 1.0), std::invalid_argument);
}

TEST(CoarseFormulas, BondOccupation) {
  EXPECT_NEAR(bond_occupation_bound(0.3, 1.0), 0.3, 1e-15);
  EXPECT_NEAR(bond_occupation_bound_log(std::log(0.3), 0.0), 0.3, 1e-15);
  EXPECT_EQ(bond_occupation_bound(0.0, 10.0), 0.0);
  EXPECT_EQ(bond_occupation_bound_log(-std::numeric_limits<double>::infinity(), 10.0), 0.0);
  // c = 2, L = 8, tau = 1.5: cL = 16 < L^tau = 22.6, so 1 - exp(-e^{6.6}) = 1
  EXPECT_GT(bond_occupation_bound_log(-16.0, std::pow(8.0, 1.5)), 1 - 1e-15);
  // agreement of the two forms in the moderate range
  EXPECT_NEAR(bond_occupation_bound(1e-3, 500.0), bond_occupation_bound_log(std::log(1e-3), std::log(500.0)), 1e-13);
  // tiny slice probability: 1 - (1 - s)^T = s T to first order
  EXPECT_NEAR(bond_occupation_bound_log(-40.0, 10.0), std::exp(-30.0), 1e-24);
  EXPECT_THROW(bond_occupation_bound(1.5, 2.0), std::invalid_argument);
  EXPECT_THROW(bond_occupation_bound(0.5, 0.5), std::invalid_argument);
}

TEST(CoarseBlocks, GeometryAndMinimizer) {
  const auto blk = coarse_block(Site{2, -1}, 3);
  EXPECT_EQ(blk.size(), 49u);
  EXPECT_EQ(blk.lo(), (Site{11, -10}));
  EXPECT_EQ(blk.hi(), (Site{17, -4}));
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  const auto theta = at(0.2718);
  const auto b1 = coarse_block(Site{3}, 10);
  const auto m = block_minimizer(h, sys, theta, b1);
  double best = INFINITY;
  Site arg = b1.site(0);
  for (std::int64_t x = b1.lo()[0]; x <= b1.hi()[0]; ++x) {
    const double v = h.log_eval(sys.orbit_point(theta, Site{x}));
    if (v < best) {
      best = v;
      arg = Site{x};
    }
  }
  EXPECT_EQ(m.u, arg);
  EXPECT_EQ(m.log_delta, best);
}

TEST(CoarseBlocks, RestrictConfiguration) {
  const SpaceTimeBox box(Region(Site{0}, Site{3}), 0.0, 4.0);
  auto c = Configuration::empty(box);
  c.deaths[1] = {0.5, 1.5, 2.5};
  c.deaths[2] = {3.5};
  c.bonds[1] = {1.2, 1.8, 3.0};  // edge (1, 2)
  c.bonds[2] = {2.0};            // edge (2, 3)
  const auto r = detail::restrict_configuration(c, Region(Site{1}, Site{2}), 1.0, 3.0);
  EXPECT_EQ(r.deaths[0], (std::vector<double>{1.5, 2.5}));
  EXPECT_TRUE(r.deaths[1].empty());
  ASSERT_EQ(r.edges.size(), 1u);
  EXPECT_EQ(r.bonds[0], (std::vector<double>{1.2, 1.8}));
  r.validate();
  EXPECT_EQ(detail::union_region(Region(Site{0, 0}, Site{1, 1}), Region(Site{3, -2}, Site{4, 0})), Region(Site{0, -2}, Site{4, 1}));
}

TEST(CoarsePercolation, FullAndEmpty) {
  auto full = iid_lattice(6, 1.0, 1);
  EXPECT_TRUE(coarse_percolates(full).crosses);
  EXPECT_TRUE(coarse_percolates(full, 1).crosses);
  EXPECT_EQ(coarse_percolates(full).largest_cluster_fraction, 1.0);
  auto empty = iid_lattice(6, 0.0, 1);
  const auto r = coarse_percolates(empty);
  EXPECT_FALSE(r.crosses);
  EXPECT_EQ(r.occupied_sites, 0u);
  EXPECT_THROW(coarse_percolates(full, 2), std::invalid_argument);
}

TEST(CoarsePercolation, SingleSiteLattice) {
  for (double p : {0.0, 1.0}) {
    const auto g = iid_lattice(1, p, 2);
    EXPECT_EQ(coarse_percolates(g).crosses, p == 1.0);
  }
}

TEST(CoarsePercolation, HighDensityCrosses) {
  int crossings = 0;
  for (std::uint64_t s = 0; s < 100; ++s) crossings += coarse_percolates(iid_lattice(20, 0.95, s)).crosses;
  EXPECT_GE(crossings, 90);
}

TEST(CoarseLattice, LargeDeathRatesBlockPercolation) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1000.0, 1e-4, 2e-4);
  CoarseParams p;
  p.L = 1;
  p.tau = 1.2;
  p.extent = {5, 5};
  const auto g = build_coarse_lattice(h, sys, at(0.1234), 0.01, p, 3);
  for (const auto& b : g.blocks) ASSERT_NEAR(b.log_delta, std::log(1000.0), 1e-12);
  const auto r = coarse_percolates(g);
  EXPECT_FALSE(r.crosses);
  EXPECT_EQ(r.occupied_sites, 0u);
}

TEST(CoarseLattice, DeepZerosGiveLikelySites) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  const auto theta = at(0.1234);
  const auto s = block_scale_search(h, sys, theta, 1.0, 1.3, {20}, 0.9);
  EXPECT_GT(s.p_site_min, 0.9);
  EXPECT_GT(s.p_bond, 0.9);
  CoarseParams p;
  p.L = s.L;
  p.tau = 1.3;
  p.extent = {20, 20};
  const auto g = build_coarse_lattice(h, sys, theta, 1.0, p, 4);
  for (const auto& b : g.blocks) EXPECT_GE(std::exp(b.log_p_site), s.p_site_min);
  EXPECT_GT(g.xi_prime_estimate(), 1.3);
  EXPECT_TRUE(coarse_percolates(g).crosses);
}

TEST(CoarseLattice, OneByOneMatchesSiteOccupation) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 2.0, 1.0);
  CoarseParams p;
  p.L = 3;
  p.extent = {1, 1};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = build_coarse_lattice(h, sys, at(0.3), 1.0, p, s);
    ASSERT_EQ(g.num_sites(), 1u);
    EXPECT_EQ(coarse_percolates(g).crosses, g.site_open[0] != 0);
  }
}

TEST(CoarseLattice, BondsRequireOccupiedEnds) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5, 1.0);
  for (auto mode : {CoarseMode::formula, CoarseMode::coupled}) {
    CoarseParams p;
    p.L = 2;
    p.tau = 1.2;
    p.extent = {6, 5};
    p.mode = mode;
    const auto g = build_coarse_lattice(h, sys, at(0.61), 2.0, p, 5);
    const auto nb = g.num_blocks(), np = g.pairs.size();
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t i = 0; i < np; ++i) {
        if (g.space_open[k * np + i]) {
          EXPECT_TRUE(g.site_open[k * nb + g.pairs[i].a] && g.site_open[k * nb + g.pairs[i].b]);
        }
      }
      if (k + 1 < 5) {
        for (std::size_t b = 0; b < nb; ++b)
          EXPECT_EQ(g.time_open[k * nb + b] != 0, g.site_open[k * nb + b] && g.site_open[(k + 1) * nb + b]);
      }
    }
  }
}

TEST(CoarseLattice, EmpiricalSliceAboveBound) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5, 1.0);
  CoarseParams p;
  p.L = 1;
  p.extent = {4, 2};
  p.mode = CoarseMode::empirical;
  p.n_mc = 4000;
  const auto g = build_coarse_lattice(h, sys, at(0.45), 1.0, p, 6);
  for (const auto& pr : g.pairs) EXPECT_GE(std::exp(pr.log_p_slice) + 3 * pr.slice_se, std::exp(g.slice_log_bound));
  const auto g4 = build_coarse_lattice(h, sys, at(0.45), 1.0, p, 6, 4);
  EXPECT_EQ(g.site_open, g4.site_open);
  EXPECT_EQ(g.space_open, g4.space_open);
}

TEST(CoarseLattice, TruncationFlaggedOutsideFormulaMode) {
  const auto sys = DynamicalSystem::rotation(Frequency::golden());
  const auto h = make_stretched({at(0.0)}, 0.5, 1.0);
  CoarseParams p;
  p.L = 8;
  p.tau = 1.2;
  p.extent = {2, 2};
  p.mode = CoarseMode::coupled;
  p.T_log_cap = 2.0;
  const auto g = build_coarse_lattice(h, sys, at(0.45), 1.0, p, 7);
  EXPECT_TRUE(g.truncated);
  EXPECT_EQ(g.T_log, 2.0);
  p.mode = CoarseMode::formula;
  EXPECT_FALSE(build_coarse_lattice(h, sys, at(0.45), 1.0, p, 7).truncated);
  p.extent = {2};
  EXPECT_THROW(build_coarse_lattice(h, sys, at(0.45), 1.0, p, 7), std::invalid_argument);
}

TEST(CoarseLattice, CsvHasOneRowPerSite) {
  const auto g = iid_lattice(3, 0.5, 8);
  std::ostringstream os;
  g.write_csv(os);
  const auto s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 9);
  EXPECT_EQ(s.substr(0, s.find('\n')), "layer,coarse,u,log_delta_u,site_prob,occupied");
}
