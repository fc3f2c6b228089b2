#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navgrpo/diffcore/adam.hpp"
#include "navgrpo/env/episode.hpp"
#include "navgrpo/env/scene.hpp"
#include "navgrpo/grpo/buffer.hpp"
#include "navgrpo/grpo/objective.hpp"

namespace navgrpo::grpo {

// Mean over records of the exact Gaussian KL between the step distributions
// of `params` and `reference`, summed over steps 1..last_k. Diagnostic only.
double kl_diagnostic(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                     const diff::ParamStore& reference, std::span<const BufferEntry> entries,
                     int last_k);

// Same, with the reference means taken from the cached records.
double kl_to_cached(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                    std::span<const BufferEntry* const> entries, int last_k);

struct CollectStats {
  int episodes = 0;
  std::size_t entries = 0;
  int successes = 0;
  int collisions = 0;
  double mean_reward = 0.0;      // over every stored candidate
  double mean_executed = 0.0;    // over executed plans
};

struct CollectSetup {
  std::span<const env::Scene> window;
  const env::EnvConfig& env;
  const reward::RewardConfig& reward;
  int episodes = 0;
  std::uint32_t version = 0;
  std::uint64_t first_episode_id = 0;
  std::uint64_t seed = 0;
};

// Runs episodes with best-of-G execution and stores every sampled group.
// A failed write surfaces as IoError naming how many entries were stored.
CollectStats collect_iteration(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                               const GrpoConfig& cfg, const CollectSetup& setup,
                               ReplayBuffer& buffer);

struct BatchMetrics {
  int iteration = 0;
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double mean_adv = 0.0;
  double max_adv = 0.0;
  bool skipped = false;
};

struct UpdateContext {
  int iteration = 0;
  int epoch = 0;
  std::uint64_t shuffle_seed = 0;
  std::function<void(const BatchMetrics&)> on_batch;
};

// One pass over the buffer in shuffled mini-batches of whole groups.
// Non-finite batches are skipped; max_skips in a row raise TrainingAborted.
std::vector<BatchMetrics> update_epoch(const ddpm::DiffusionPolicy& policy,
                                       diff::ParamStore& params, diff::Adam& optimizer,
                                       const ReplayBuffer& buffer, const GrpoConfig& cfg,
                                       const UpdateContext& ctx);

// Loss, log-ratios and gradients for one mini-batch, without stepping.
struct BatchEval {
  double loss = 0.0;
  std::vector<double> log_ratios;
  std::vector<double> advantages;
  diff::Gradients grads;
};
BatchEval evaluate_batch(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                         std::span<const BufferEntry* const> entries, const GrpoConfig& cfg);

// Fixed start observations from held-in tasks.
struct ProbeSet {
  std::vector<ddpm::Observation> observations;
};
ProbeSet make_probe_set(std::span<const env::Scene> scenes, const env::EnvConfig& env, int count,
                        std::uint64_t seed);
// Mean analytic reward of G samples per probe observation, common noise
// across calls with the same seed.
double probe_reward(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                    const ProbeSet& probe, std::size_t group, const reward::RewardConfig& reward,
                    std::uint64_t seed);

// Index maximizing the trailing-window mean (window truncated at the start);
// ties go to the later index.
std::size_t select_checkpoint(std::span<const double> rewards, int window);

struct IterationSummary {
  int iteration = 0;
  std::vector<std::uint64_t> window_seeds;
  CollectStats collect;
  std::size_t buffer_entries = 0;
  std::size_t buffer_episodes = 0;
  int batches = 0;
  int skipped = 0;
  double mean_loss = 0.0;
  double mean_kl = 0.0;
  std::vector<double> epoch_probes;
  std::size_t selected = 0;  // index into the probe history
  double selected_score = 0.0;
  double seconds = 0.0;
};

struct FinetuneHooks {
  std::string work_dir;  // buffer and resume state live here
  bool resume = false;
  bool keep_final_buffer = false;  // leave the last iteration's buffer on disk
  std::uint64_t config_hash = 0;
  std::function<void(const BatchMetrics&)> on_batch;
  std::function<void(const IterationSummary&, const diff::ParamStore&)> on_iteration;
  // Stop after this many iterations of this call, leaving resumable state.
  std::optional<int> stop_after;
};

struct FinetuneResult {
  diff::ParamStore params;
  std::vector<double> probe_history;  // entry 0 is the input policy
  std::size_t selected = 0;
  std::vector<IterationSummary> iterations;
  int completed = 0;
};

std::string summary_to_json(const IterationSummary& s);
IterationSummary summary_from_json(const std::string& text);

FinetuneResult finetune(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& initial,
                        std::span<const env::Scene> pool, const env::EnvConfig& env,
                        const reward::RewardConfig& reward, const GrpoConfig& cfg,
                        const FinetuneHooks& hooks);

}  // namespace navgrpo::grpo
