#include "navgrpo/bc/expert.hpp"

#include <algorithm>
#include <cmath>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::bc {

namespace {

bool segment_free(const env::OccupancyGrid& grid, Vec2 a, Vec2 b) {
  const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / (grid.cell_size() / 4))));
  for (int j = 0; j <= n; ++j) {
    if (grid.occupied(a + (b - a) * (static_cast<double>(j) / n))) return false;
  }
  return true;
}

std::optional<std::vector<Vec2>> plan_on(const env::OccupancyGrid& grid, Vec2 start, Vec2 goal) {
  const env::Cell sc = grid.cell_of(start);
  const env::Cell gc = grid.cell_of(goal);
  const auto path = env::shortest_grid_path(grid, sc, gc);
  if (!path) return std::nullopt;
  std::vector<Vec2> pts{start};
  for (std::size_t i = 1; i + 1 < path->cells.size(); ++i) pts.push_back(grid.center(path->cells[i]));
  pts.push_back(goal);

  std::vector<Vec2> out{start};
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t j = pts.size() - 1;
    while (j > i + 1 && !segment_free(grid, pts[i], pts[j])) --j;
    out.push_back(pts[j]);
    i = j;
  }
  return out;
}

}  // namespace

std::vector<Vec2> expert_path(const env::Scene& scene, Vec2 start, Vec2 goal,
                              const ExpertConfig& config) {
  if (distance(start, goal) == 0.0) return {start, goal};
  env::OccupancyGrid safe = scene.grid.inflated(config.clearance);
  for (Vec2 p : {start, goal}) {
    const env::Cell c = safe.cell_of(p);
    if (safe.in_bounds(c) && !scene.grid.occupied(c)) safe.set(c, false);
  }
  if (auto p = plan_on(safe, start, goal)) return *p;
  if (auto p = plan_on(scene.grid, start, goal)) return *p;
  throw UsageError("expert: goal unreachable");
}

ddpm::Trajectory expert_trajectory(const env::Scene& scene, const Pose& pose, Vec2 goal,
                                   const ExpertConfig& config) {
  const auto path = expert_path(scene, pose.position, goal, config);
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < path.size(); ++i) cum.push_back(cum.back() + distance(path[i - 1], path[i]));
  ddpm::Trajectory t;
  std::size_t seg = 1;
  for (int h = 1; h <= config.horizon; ++h) {
    const double s = std::min(h * config.spacing, cum.back());
    while (seg + 1 < path.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 1.0;
    const Vec2 world = s >= cum.back() ? goal : path[seg - 1] + (path[seg] - path[seg - 1]) * f;
    t.waypoints.push_back(pose.to_local(world));
  }
  return t;
}

ddpm::Trajectory ExpertPlanner::plan(const env::PlanContext& ctx, Rng&) {
  return expert_trajectory(ctx.scene, ctx.state.pose, ctx.task.goal, config_);
}

}  // namespace navgrpo::bc
