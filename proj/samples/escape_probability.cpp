// Escape probability of the q=1 model on a constant environment, compared
// with the closed form at lambda=0 and swept over lambda.
#include <cmath>
#include <cstdio>

#include "qpfk/percolation/estimate.hpp"

int main() {
  using namespace qpfk;
  const double delta = 1.0, T = 1.0;
  const auto box = SpaceTimeBox::cylinder(Site{0}, 3, T);
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    const auto env = Environment::constant(box.region, delta, lambda);
    const auto e = estimate_event(env, box, Event::escape(Site{0}), 20000, 1);
    const auto ci = e.interval(1.96);
    std::printf("lambda %.2f  escape %.4f  [%.4f, %.4f]\n", lambda, e.estimate, ci.lo, ci.hi);
  }
  std::printf("closed form at lambda 0: %.4f\n", 2 * std::exp(-delta * T) - std::exp(-2 * delta * T));
}
