// Single-layer injectivity bound next to a sampled injectivity rate.
#include <cstdio>

#include "wlticket/bounds.hpp"

using namespace wlticket;

int main() {
  std::printf("%4s %5s %3s %3s %10s %8s %8s\n", "N", "rho", "k", "m", "gamma_raw", "rate", "m_req");
  for (std::size_t n : {2, 3, 5}) {
    for (double rho : {0.3, 0.5, 0.7}) {
      for (std::size_t m : {2, 4, 8}) {
        const auto r = injectivity_monte_carlo(n, rho, 1, m, 2000, Rng(7, n * 100 + m));
        std::printf("%4zu %5.2f %3d %3zu %10.4f %8.4f %8zu\n", n, rho, 1, m, r.gamma.raw, r.rate,
                    required_width(0.99, n, 1, rho));
      }
    }
  }
}
