#pragma once

#include <deque>
#include <string_view>
#include <vector>

#include "navgrpo/common/rng.hpp"
#include "navgrpo/ddpm/policy.hpp"
#include "navgrpo/env/motion.hpp"
#include "navgrpo/env/scene.hpp"
#include "navgrpo/reward/reward.hpp"

namespace navgrpo::env {

enum class Termination { Goal, Collision, Timeout };
std::string_view termination_name(Termination t);

struct EpisodeResult {
  bool success = false;
  double shortest_length = 0.0;  // L
  double path_length = 0.0;      // P
  int steps = 0;
  Termination cause = Termination::Timeout;
  std::vector<double> step_rewards;  // analytic reward of each executed plan

  double spl() const;
};

// Keeps the last F single-frame patches and stacks them newest first. The
// first frame of an episode is replicated to fill the history.
class FrameHistory {
 public:
  explicit FrameHistory(int frames) : frames_(frames) {}
  ddpm::Observation push(const ddpm::Observation& single);

 private:
  int frames_;
  std::deque<std::vector<std::uint8_t>> history_;
};

struct PlanContext {
  const Scene& scene;
  const Task& task;
  const RobotState& state;
  const ddpm::Observation& obs;  // stacked frames, goal in the robot frame
  int step = 0;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual ddpm::Trajectory plan(const PlanContext& ctx, Rng& rng) = 0;
};

// Receding-horizon loop: observe, plan, execute the first n_exec waypoints,
// until goal, collision or timeout.
EpisodeResult run_episode(Planner& planner, const Scene& scene, const Task& task,
                          const EnvConfig& env, const reward::RewardConfig& reward, Rng& rng);

// Straight line toward the goal at fixed spacing, clamped at the goal.
class StraightPlanner : public Planner {
 public:
  StraightPlanner(int horizon, double spacing) : horizon_(horizon), spacing_(spacing) {}
  ddpm::Trajectory plan(const PlanContext& ctx, Rng& rng) override;

 private:
  int horizon_;
  double spacing_;
};

// Straight line in a uniformly random direction.
class RandomPlanner : public Planner {
 public:
  RandomPlanner(int horizon, double spacing) : horizon_(horizon), spacing_(spacing) {}
  ddpm::Trajectory plan(const PlanContext& ctx, Rng& rng) override;

 private:
  int horizon_;
  double spacing_;
};

// Samples G candidates from the diffusion policy and executes the one with
// the highest analytic reward. The last group is kept for inspection.
class DiffusionPlanner : public Planner {
 public:
  DiffusionPlanner(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                   std::size_t group, reward::RewardConfig reward, bool deterministic = false)
      : policy_(policy),
        params_(params),
        group_(group),
        reward_(reward),
        deterministic_(deterministic) {}

  ddpm::Trajectory plan(const PlanContext& ctx, Rng& rng) override;

  const std::vector<ddpm::Candidate>& last_candidates() const { return candidates_; }
  const std::vector<reward::RewardBreakdown>& last_rewards() const { return rewards_; }
  std::size_t last_choice() const { return choice_; }

 private:
  const ddpm::DiffusionPolicy& policy_;
  const diff::ParamStore& params_;
  std::size_t group_;
  reward::RewardConfig reward_;
  bool deterministic_;
  std::vector<ddpm::Candidate> candidates_;
  std::vector<reward::RewardBreakdown> rewards_;
  std::size_t choice_ = 0;
};

}  // namespace navgrpo::env
