#include "navgrpo/ddpm/schedule.hpp"

#include <cmath>
#include <string>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::ddpm {

DdpmSchedule DdpmSchedule::linear(int steps, double beta_min, double beta_max) {
  if (steps < 2) throw ConfigError("diffusion needs at least 2 steps, got " + std::to_string(steps));
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ConfigError("beta bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  DdpmSchedule s;
  s.steps = steps;
  s.beta.assign(steps + 1, 0.0);
  s.alpha.assign(steps + 1, 1.0);
  s.alpha_bar.assign(steps + 1, 1.0);
  s.sigma.assign(steps + 1, 0.0);
  for (int k = 1; k <= steps; ++k) {
    const double frac = static_cast<double>(k - 1) / static_cast<double>(steps - 1);
    s.beta[k] = beta_min + (beta_max - beta_min) * frac;
    s.alpha[k] = 1.0 - s.beta[k];
    s.alpha_bar[k] = s.alpha_bar[k - 1] * s.alpha[k];
    s.sigma[k] = std::sqrt(s.beta[k]);
  }
  return s;
}

void DdpmSchedule::check_step(int k) const {
  if (k < 1 || k > steps) {
    throw UsageError("diffusion step " + std::to_string(k) + " outside 1.." + std::to_string(steps));
  }
}

double DdpmSchedule::state_coef(int k) const { return 1.0 / std::sqrt(alpha[k]); }

double DdpmSchedule::noise_coef(int k) const { return beta[k] / std::sqrt(1.0 - alpha_bar[k]); }

}  // namespace navgrpo::ddpm
