#pragma once

#include <span>
#include <string>
#include <vector>

#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::grpo {

struct GrpoConfig {
  std::size_t group = 16;       // G
  double adv_eps = 1e-8;        // advantage denominator stabilizer
  double clip = 0.2;            // ratio clip range
  double kl_coef = 0.0;         // KL stays a diagnostic; only 0 is accepted
  int last_k = 7;               // truncated chain length for ratios
  int iterations = 8;           // M
  int episodes = 130;           // per iteration
  int window = 4;               // scenes per iteration
  int window_stride = 1;
  std::size_t buffer_capacity = 128;  // episodes
  int epochs = 2;               // E
  int minibatch = 64;           // trajectories, whole groups only
  double lr = 1e-5;
  int select_window = 5;
  int trainable_blocks = 3;     // N top decoder blocks
  bool clip_objective = true;
  bool normalize_advantages = true;
  int probe_tasks = 20;
  std::uint64_t probe_seed = 77;
  int max_skips = 3;            // consecutive non-finite batches before abort
  std::uint64_t seed = 0;

  void validate(int total_blocks, int diffusion_steps) const;
};

// Parameter groups for selective fine-tuning.
enum class Group { Encoder, DecoderFrozen, DecoderTrain, Head };
const char* to_string(Group g);

struct ParamPartition {
  int total_blocks = 8;      // L
  int trainable_blocks = 3;  // N; N = L leaves only the encoder frozen

  Group group_of(const diff::Parameter& p) const;
  bool trainable(const diff::Parameter& p) const {
    const Group g = group_of(p);
    return g == Group::DecoderTrain || g == Group::Head;
  }
  // Sets every trainable flag in `store` from the partition.
  void apply(diff::ParamStore& store) const;
  std::vector<std::string> members(const diff::ParamStore& store, Group g) const;
  // Checksum of the encoder and frozen decoder parameters.
  std::uint64_t frozen_checksum(const diff::ParamStore& store) const;
};

struct AdvantageGroup {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> advantages;
};

// A_i = (R_i - mean) / (std + eps); with normalize = false, A_i = R_i - mean.
AdvantageGroup group_advantages(std::span<const double> rewards, double eps,
                                bool normalize = true);

// -mean_i min(r_i A_i, clip(r_i, 1 - c, 1 + c) A_i); clipped = false drops
// the clipped term.
double grpo_loss(std::span<const double> ratios, std::span<const double> advantages,
                 double clip, bool clipped = true);

// Differentiable version over a [n, 1] column of log-ratios.
diff::Var grpo_loss(diff::Var log_ratio, std::span<const double> advantages, double clip,
                    bool clipped = true);

}  // namespace navgrpo::grpo
