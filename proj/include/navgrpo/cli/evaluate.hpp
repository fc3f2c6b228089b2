#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navgrpo/env/episode.hpp"

namespace navgrpo::cli {

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::uint64_t scene = 0;
  int task = 0;
  bool success = false;
  double spl = 0.0;
  double path_length = 0.0;
  double shortest_length = 0.0;
  int steps = 0;
  env::Termination cause = env::Termination::Timeout;
};

struct Rates {
  double sr = 0.0;
  double spl = 0.0;
  double collision = 0.0;
  int episodes = 0;
};

struct SeedRates {
  std::uint64_t seed = 0;
  Rates rates;
};

struct SceneRates {
  std::uint64_t scene = 0;
  std::string difficulty;
  std::vector<SeedRates> per_seed;
  Rates mean;  // over seeds
};

struct EvalReport {
  std::string label;
  std::uint64_t config_hash = 0;
  std::vector<SeedRates> per_seed;
  std::vector<SceneRates> per_scene;
  Rates mean;  // arithmetic mean of the per-seed values
  std::vector<EpisodeLog> episodes;  // ordered by seed, scene, task

  nlohmann::json to_json(bool with_episodes = true) const;
  std::string table() const;
};

// Arithmetic mean of per-seed rates.
Rates mean_over_seeds(std::span<const SeedRates> seeds);

using PlannerFactory = std::function<std::unique_ptr<env::Planner>()>;

struct EvalSetup {
  std::span<const env::Scene> scenes;
  std::vector<std::uint64_t> seeds;
  const env::EnvConfig& env;
  const reward::RewardConfig& reward;
  int workers = 0;  // 0: hardware concurrency
};

// Runs every task of every scene once per seed. Episode randomness depends
// only on (seed, scene, task), so results do not depend on scheduling.
EvalReport evaluate(const PlannerFactory& make_planner, const EvalSetup& setup,
                    std::string label = {});

// Side-by-side aligned table of several reports' mean rates.
std::string comparison_table(std::span<const EvalReport> reports);

}  // namespace navgrpo::cli
