// Multiscale exponents and the scale schedule for d=1, xi=0.5, nu=0.9.
#include <cstdio>

#include "qpfk/multiscale/exponents.hpp"

int main() {
  using namespace qpfk;
  const auto e = feasible_exponents(1, 0.5, 0.9);
  std::printf("%s\n", e.to_json().dump(2).c_str());
  const auto s = make_schedule(e, 8, 0.25, 1);
  std::printf("%s\n", s.to_json().dump(2).c_str());
  try {
    feasible_exponents(1, 0.5, 0.7);
  } catch (const InfeasibleExponents& err) {
    std::printf("rejected: %s\n", err.constraint().c_str());
  }
}
