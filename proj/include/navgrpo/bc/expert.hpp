#pragma once

#include "navgrpo/env/episode.hpp"

namespace navgrpo::bc {

struct ExpertConfig {
  int horizon = 24;
  double spacing = 0.25;
  double clearance = 0.3;  // planning inflation radius
};

// Privileged planner: A* on the inflated scene grid (true grid as fallback),
// line-of-sight shortcutting, then arc-length resampling into `horizon`
// robot-frame waypoints. Waypoints past the goal repeat the goal. Throws
// UsageError when the goal is unreachable.
ddpm::Trajectory expert_trajectory(const env::Scene& scene, const Pose& pose, Vec2 goal,
                                   const ExpertConfig& config = {});

// Points of the shortcut path in the world frame, start to goal.
std::vector<Vec2> expert_path(const env::Scene& scene, Vec2 start, Vec2 goal,
                              const ExpertConfig& config = {});

class ExpertPlanner : public env::Planner {
 public:
  explicit ExpertPlanner(ExpertConfig config = {}) : config_(config) {}
  ddpm::Trajectory plan(const env::PlanContext& ctx, Rng& rng) override;

 private:
  ExpertConfig config_;
};

}  // namespace navgrpo::bc
