#pragma once

#include <vector>

namespace navgrpo::ddpm {

// Linear-beta DDPM schedule. Arrays are indexed by diffusion step k = 0..K,
// where index 0 holds the clean-data convention (beta 0, alpha_bar 1).
struct DdpmSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  // Sampling standard deviation; sigma_k^2 = beta_k for every k >= 1, so the
  // final reverse step keeps a proper density.
  std::vector<double> sigma;

  static DdpmSchedule linear(int steps, double beta_min, double beta_max);

  // Posterior mean mu = state_coef(k) * (tau_k - noise_coef(k) * eps_hat).
  double state_coef(int k) const;
  double noise_coef(int k) const;
  void check_step(int k) const;
};

}  // namespace navgrpo::ddpm
