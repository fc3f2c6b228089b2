#include "navgrpo/env/motion.hpp"

#include <cmath>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::env {

MotionResult execute_waypoints(const Scene& scene, const RobotState& state,
                               const ddpm::Trajectory& traj, int n_exec, Vec2 goal,
                               const EnvConfig& config) {
  if (n_exec < 1 || n_exec > static_cast<int>(traj.size())) {
    throw UsageError("n_exec must lie in [1, H]");
  }
  MotionResult res;
  res.state = state;
  Vec2 cur = state.pose.position;
  const double step = config.motion_step();
  for (int i = 0; i < n_exec; ++i) {
    const Vec2 next = state.pose.to_world(traj[static_cast<std::size_t>(i)]);
    const double len = distance(cur, next);
    const int n = static_cast<int>(std::ceil(len / step));
    const Vec2 seg_start = cur;
    for (int j = 1; j <= n; ++j) {
      const Vec2 q = seg_start + (next - seg_start) * (static_cast<double>(j) / n);
      if (scene.grid.occupied(q)) {
        res.collided = true;
        res.collision_point = q;
        break;
      }
      res.state.path_length += distance(cur, q);
      cur = q;
      if (distance(cur, goal) < config.success_radius) {
        res.reached_goal = true;
        break;
      }
    }
    if (len > 1e-12 && cur != seg_start) {
      const Vec2 d = cur - seg_start;
      res.state.pose.heading = std::atan2(d.y, d.x);
    }
    if (res.collided || res.reached_goal) break;
  }
  res.state.pose.position = cur;
  return res;
}

}  // namespace navgrpo::env
