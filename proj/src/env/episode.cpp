#include "navgrpo/env/episode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "navgrpo/common/errors.hpp"
#include "navgrpo/env/sensing.hpp"

namespace navgrpo::env {

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::Goal: return "goal";
    case Termination::Collision: return "collision";
    case Termination::Timeout: return "timeout";
  }
  return "?";
}

double EpisodeResult::spl() const {
  if (!success) return 0.0;
  return shortest_length / std::max(path_length, shortest_length);
}

ddpm::Observation FrameHistory::push(const ddpm::Observation& single) {
  if (frames_ < 1) throw ConfigError("frame history must be >= 1");
  if (history_.empty()) {
    history_.assign(static_cast<std::size_t>(frames_), single.patch);
  } else {
    history_.pop_back();
    history_.push_front(single.patch);
  }
  ddpm::Observation out = single;
  out.frames = frames_;
  out.patch.clear();
  for (const auto& f : history_) out.patch.insert(out.patch.end(), f.begin(), f.end());
  return out;
}

EpisodeResult run_episode(Planner& planner, const Scene& scene, const Task& task,
                          const EnvConfig& env, const reward::RewardConfig& reward, Rng& rng) {
  EpisodeResult result;
  result.shortest_length =
      std::max(shortest_path_length(scene, task.start.position, task.goal), env.cell_size);
  RobotState state{task.start, 0.0};
  if (distance(state.pose.position, task.goal) < env.success_radius) {
    result.success = true;
    result.cause = Termination::Goal;
    return result;
  }
  FrameHistory history(env.frames);
  for (int step = 0; step < env.max_steps; ++step) {
    const auto obs = history.push(observe(scene, state.pose, task.goal, env));
    const PlanContext ctx{scene, task, state, obs, step};
    const ddpm::Trajectory traj = planner.plan(ctx, rng);
    const auto occ = reward::build_local_occupancy(obs, reward.inflation_radius);
    result.step_rewards.push_back(reward::score(traj, occ, obs.goal, reward).total);

    const MotionResult motion =
        execute_waypoints(scene, state, traj, std::min<int>(env.n_exec, traj.size()), task.goal,
                          env);
    state = motion.state;
    result.steps = step + 1;
    if (motion.collided) {
      result.cause = Termination::Collision;
      break;
    }
    if (motion.reached_goal) {
      result.success = true;
      result.cause = Termination::Goal;
      break;
    }
  }
  result.path_length = state.path_length;
  return result;
}

namespace {

ddpm::Trajectory straight(Vec2 direction, double max_len, int horizon, double spacing) {
  ddpm::Trajectory t;
  const double n = direction.norm();
  const Vec2 unit = n > 0 ? direction * (1.0 / n) : Vec2{1.0, 0.0};
  for (int h = 1; h <= horizon; ++h) t.waypoints.push_back(unit * std::min(h * spacing, max_len));
  return t;
}

}  // namespace

ddpm::Trajectory StraightPlanner::plan(const PlanContext& ctx, Rng&) {
  return straight(ctx.obs.goal, ctx.obs.goal.norm(), horizon_, spacing_);
}

ddpm::Trajectory RandomPlanner::plan(const PlanContext&, Rng& rng) {
  const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return straight({std::cos(a), std::sin(a)}, horizon_ * spacing_, horizon_, spacing_);
}

ddpm::Trajectory DiffusionPlanner::plan(const PlanContext& ctx, Rng& rng) {
  candidates_ = policy_.sample(params_, ctx.obs, group_, rng, deterministic_);
  const auto occ = reward::build_local_occupancy(ctx.obs, reward_.inflation_radius);
  rewards_.clear();
  for (const auto& c : candidates_) {
    rewards_.push_back(reward::score(c.trajectory, occ, ctx.obs.goal, reward_));
  }
  choice_ = 0;
  for (std::size_t i = 1; i < rewards_.size(); ++i) {
    if (rewards_[i].total > rewards_[choice_].total) choice_ = i;
  }
  return candidates_[choice_].trajectory;
}

}  // namespace navgrpo::env
