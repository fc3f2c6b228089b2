#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "navgrpo/bc/expert.hpp"
#include "navgrpo/ddpm/policy.hpp"
#include "navgrpo/diffcore/adam.hpp"

namespace navgrpo::bc {

struct Demonstration {
  ddpm::Observation obs;
  ddpm::Trajectory traj;  // robot frame
  std::uint64_t scene_seed = 0;
  std::int32_t task = 0;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct DemoConfig {
  int budget = 4000;
  // Probability that an executed plan is laterally perturbed, to visit
  // off-expert states. Labels are always the unperturbed expert plan.
  double perturb_prob = 0.3;
  double perturb_std = 0.4;
  std::uint64_t seed = 0;
};

// Expert rollouts over the tasks of `scenes`, cycling until the budget is met.
std::vector<Demonstration> collect_demonstrations(std::span<const env::Scene> scenes,
                                                  const env::EnvConfig& env,
                                                  const ExpertConfig& expert,
                                                  const DemoConfig& config);

void save_demonstrations(const std::string& path, std::span<const Demonstration> demos);
std::vector<Demonstration> load_demonstrations(const std::string& path);

// Mean squared error between `noise` and eps_theta(q_sample(tau, k, noise), k, o).
double bc_loss(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
               const Demonstration& demo, int k, std::span<const double> noise);

// Batched, differentiable: mean over rows and coordinates. noise is
// [batch, 2H].
diff::Var bc_loss(diff::Tape& tape, const ddpm::DiffusionPolicy& policy,
                  const diff::ParamStore& params, std::span<const Demonstration* const> batch,
                  std::span<const int> steps, const diff::Tensor& noise);

struct PretrainConfig {
  int epochs = 20;
  int batch = 64;
  double lr = 1e-4;
  // Cosine decay from lr to lr * final_lr_fraction over all steps; 1 keeps
  // the rate constant.
  double final_lr_fraction = 1.0;
  // Spread diffusion steps evenly over each batch from a random offset; each
  // sample's step stays uniform on 1..K.
  bool stratify_steps = true;
  double holdout_fraction = 0.1;
  int holdout_draws = 4;  // fixed (k, noise) draws per held-out demo
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
};

struct PretrainResult {
  diff::ParamStore params;
  diff::Adam optimizer;
  double initial_heldout = 0.0;
  std::vector<EpochStats> curve;
};

// Trains every parameter group with the denoising loss.
PretrainResult pretrain(const ddpm::DiffusionPolicy& policy, diff::ParamStore params,
                        std::span<const Demonstration> demos, const PretrainConfig& config,
                        const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace navgrpo::bc
