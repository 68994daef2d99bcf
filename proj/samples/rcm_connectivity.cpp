// Two-site connection probability at q=2: birth-death MCMC against the
// discretized exact oracle.
#include <cstdio>

#include "qpfk/random_cluster/oracle.hpp"
#include "qpfk/random_cluster/rcm.hpp"

int main() {
  using namespace qpfk;
  const Region r(Site{0}, Site{1});
  const SpaceTimeBox box(r, -1.0, 1.0);
  const SpaceTimePoint a{Site{0}, 0.0}, b{Site{1}, 0.0};
  McParams mc;
  mc.n_sweeps = 20000;
  mc.burn_in = 1000;
  const auto res = rcm_estimate(Environment::constant(r, 1.0, 1.0, 2.0), box, Event::connect(a, b), mc, 7);
  const double exact = DiscretizedOracle::uniform(r, 1.0, 1.0, 2.0, 1.0, 1.0 / 256).connect_transfer(a.x, a.t, b.x, b.t);
  std::printf("mcmc %.4f +- %.4f (rhat %.4f, ess %.0f)\n", res.estimate.estimate, res.estimate.std_error(), res.rhat, res.ess);
  std::printf("oracle %.4f\n", exact);
}
