// Ball masses and a Katok estimate on the Bernoulli(1/2) suspension flow.

#include <cstdio>
#include <vector>

#include "expanse/expanse.hpp"

int main() {
  using namespace expanse;
  const auto flow = FlowSystem::suspension(2);
  const auto mu = sample_measure(flow, MeasureDescriptor::bernoulli({0.5, 0.5}), 5000, 1);

  // Mass of generalized forward balls around one sampled centre.
  const auto x = draw_centers(flow, mu, 1, 2).front();
  const std::vector<double> horizons{1, 2, 3, 4, 5};
  const auto mass = ball_masses(mu, flow, x, 0.2, 0.2, BallKind::generalized, BallSide::forward, horizons, 0.1,
                                5, SlackPolicy::grid);
  for (std::size_t k = 0; k < horizons.size(); ++k) std::printf("t=%-3g mass=%.5f\n", horizons[k], mass[k]);

  // Covering-number growth rate; log 2 ~ 0.693 is the exact entropy.
  KatokConfig cfg;
  cfg.eps_grid = {0.2};
  cfg.n_grid = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto est = katok_entropy(flow, mu, cfg);
  std::printf("Katok rate at eps=0.2: %.3f\n", est.rate_at_smallest_eps);
}
