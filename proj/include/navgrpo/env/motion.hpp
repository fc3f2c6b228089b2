#pragma once

#include "navgrpo/ddpm/trajectory.hpp"
#include "navgrpo/env/scene.hpp"

namespace navgrpo::env {

struct RobotState {
  Pose pose;
  double path_length = 0.0;
};

struct MotionResult {
  RobotState state;
  bool collided = false;
  bool reached_goal = false;
  Vec2 collision_point;  // first occupied sub-sample
};

// Follows straight segments through the first n_exec robot-frame waypoints,
// checking the scene grid every config.motion_step(). Stops before the first
// occupied sub-sample or as soon as the goal is within the success radius.
MotionResult execute_waypoints(const Scene& scene, const RobotState& state,
                               const ddpm::Trajectory& traj, int n_exec, Vec2 goal,
                               const EnvConfig& config);

}  // namespace navgrpo::env
