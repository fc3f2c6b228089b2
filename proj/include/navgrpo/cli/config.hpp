#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navgrpo/bc/expert.hpp"
#include "navgrpo/bc/pretrain.hpp"
#include "navgrpo/ddpm/policy.hpp"
#include "navgrpo/env/scene.hpp"
#include "navgrpo/grpo/objective.hpp"
#include "navgrpo/reward/reward.hpp"

namespace navgrpo::cli {

struct ScheduleConfig {
  int steps = 10;
  double beta_min = 1e-3;
  double beta_max = 0.5;
};

struct SceneSet {
  std::uint64_t first_seed = 0;
  int count = 0;
};

struct ScenesConfig {
  SceneSet seen{1000, 8};
  SceneSet unseen{5000, 6};
  // Difficulty of scene i is difficulty_cycle[i % size].
  std::vector<std::string> difficulty_cycle{"easy", "medium", "hard"};
};

struct EvalConfig {
  std::vector<std::uint64_t> seeds{1234, 42, 10};
  std::size_t group = 16;
  bool deterministic = false;
  int workers = 0;  // 0: hardware concurrency
};

// Every tunable of a run. Serialized as nested JSON; unknown keys are errors.
struct RunConfig {
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
  ddpm::NetworkConfig network;
  double traj_scale = 3.0;
  env::EnvConfig env;
  reward::RewardConfig reward;
  bc::ExpertConfig expert;
  bc::DemoConfig demos;
  bc::PretrainConfig pretrain = default_pretrain();
  grpo::GrpoConfig grpo;
  ScenesConfig scenes;
  EvalConfig eval;

  // Longer, faster-decaying pretraining than the bare BC defaults.
  static bc::PretrainConfig default_pretrain();

  std::string to_json_text() const;
  // Missing keys keep their defaults. Throws ConfigError naming the key.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  // Hash of the full configuration.
  std::uint64_t config_hash() const;
  // Hash of the schedule, network and trajectory scale only.
  std::uint64_t model_hash() const;

  void validate() const;

  ddpm::DiffusionPolicy make_policy() const;
  std::vector<env::Scene> seen_scenes() const;
  std::vector<env::Scene> unseen_scenes() const;
};

std::string hex(std::uint64_t v);

}  // namespace navgrpo::cli
