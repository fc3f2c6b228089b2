#include "navgrpo/grpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::grpo {

namespace ops = diff::ops;

void GrpoConfig::validate(int total_blocks, int diffusion_steps) const {
  if (group < 2) throw ConfigError("group size must be >= 2");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("clip range must lie in (0, 1)");
  if (kl_coef != 0.0) throw ConfigError("only a zero KL coefficient is supported");
  if (!(adv_eps > 0.0)) throw ConfigError("advantage eps must be positive");
  if (last_k < 1 || last_k > diffusion_steps) {
    throw ConfigError("last_k must lie in 1.." + std::to_string(diffusion_steps));
  }
  if (iterations < 0 || episodes < 1 || window < 1 || window_stride < 0 || buffer_capacity < 1 ||
      epochs < 0 || minibatch < 1 || select_window < 1 || probe_tasks < 1 || max_skips < 1) {
    throw ConfigError("fine-tuning counts must be positive");
  }
  if (static_cast<std::size_t>(minibatch) % group != 0) {
    throw ConfigError("mini-batch must hold whole groups");
  }
  if (trainable_blocks < 0 || trainable_blocks > total_blocks) {
    throw ConfigError("trainable blocks must lie in 0.." + std::to_string(total_blocks));
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

const char* to_string(Group g) {
  switch (g) {
    case Group::Encoder: return "encoder";
    case Group::DecoderFrozen: return "decoder_frozen";
    case Group::DecoderTrain: return "decoder_train";
    case Group::Head: return "head";
  }
  return "?";
}

Group ParamPartition::group_of(const diff::Parameter& p) const {
  switch (p.role) {
    case diff::LayerRole::Encoder: return Group::Encoder;
    case diff::LayerRole::Head: return Group::Head;
    case diff::LayerRole::Decoder:
      return p.block >= total_blocks - trainable_blocks ? Group::DecoderTrain
                                                        : Group::DecoderFrozen;
  }
  return Group::Encoder;
}

void ParamPartition::apply(diff::ParamStore& store) const {
  for (auto& p : store) p.trainable = trainable(p);
}

std::vector<std::string> ParamPartition::members(const diff::ParamStore& store, Group g) const {
  std::vector<std::string> out;
  for (const auto& p : store) {
    if (group_of(p) == g) out.push_back(p.name);
  }
  return out;
}

std::uint64_t ParamPartition::frozen_checksum(const diff::ParamStore& store) const {
  return store.checksum([this](const diff::Parameter& p) { return !trainable(p); });
}

AdvantageGroup group_advantages(std::span<const double> rewards, double eps, bool normalize) {
  if (rewards.size() < 2) throw UsageError("advantages need a group of at least 2");
  AdvantageGroup g;
  g.rewards.assign(rewards.begin(), rewards.end());
  const double n = static_cast<double>(rewards.size());
  g.mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - g.mean) * (r - g.mean);
  g.std = std::sqrt(ss / n);
  const double denom = normalize ? g.std + eps : 1.0;
  for (double r : rewards) g.advantages.push_back((r - g.mean) / denom);
  return g;
}

double grpo_loss(std::span<const double> ratios, std::span<const double> advantages, double clip,
                 bool clipped) {
  if (ratios.size() != advantages.size() || ratios.empty()) {
    throw UsageError("grpo_loss: ratios and advantages differ in length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double unclipped = ratios[i] * advantages[i];
    const double bounded = std::clamp(ratios[i], 1.0 - clip, 1.0 + clip) * advantages[i];
    s += clipped ? std::min(unclipped, bounded) : unclipped;
  }
  return -s / static_cast<double>(ratios.size());
}

diff::Var grpo_loss(diff::Var log_ratio, std::span<const double> advantages, double clip,
                    bool clipped) {
  const auto& v = log_ratio.value();
  if (v.rows() != advantages.size() || v.cols() != 1) {
    throw UsageError("grpo_loss: log-ratio column and advantages differ");
  }
  diff::Tape& tape = *log_ratio.tape();
  diff::Var adv = tape.constant(diff::Tensor({advantages.size(), 1},
                                             std::vector<double>(advantages.begin(), advantages.end())));
  diff::Var ratio = ops::exp(log_ratio);
  diff::Var surrogate = ops::mul(ratio, adv);
  if (clipped) {
    surrogate = ops::minimum(surrogate, ops::mul(ops::clamp(ratio, 1.0 - clip, 1.0 + clip), adv));
  }
  return ops::scale(ops::mean(surrogate), -1.0);
}

}  // namespace navgrpo::grpo
