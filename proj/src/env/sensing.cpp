#include "navgrpo/env/sensing.hpp"

#include <cmath>

namespace navgrpo::env {

bool line_of_sight(const OccupancyGrid& grid, Vec2 eye, Vec2 target) {
  const Cell goal_cell = grid.cell_of(target);
  const double len = distance(eye, target);
  const int n = static_cast<int>(std::ceil(len / (grid.cell_size() / 4.0)));
  for (int j = 1; j < n; ++j) {
    const Vec2 q = eye + (target - eye) * (static_cast<double>(j) / n);
    const Cell c = grid.cell_of(q);
    if (c == goal_cell) return true;
    if (grid.occupied(c)) return false;
  }
  return true;
}

bool cell_visible(const OccupancyGrid& grid, Vec2 eye, Cell cell) {
  const Vec2 c = grid.center(cell);
  const double r = 0.45 * grid.cell_size();
  const Vec2 probes[] = {c, c + Vec2{-r, -r}, c + Vec2{r, -r}, c + Vec2{-r, r}, c + Vec2{r, r}};
  for (const Vec2& p : probes) {
    if (line_of_sight(grid, eye, p)) return true;
  }
  return false;
}

ddpm::Observation observe(const Scene& scene, const Pose& pose, Vec2 goal,
                          const EnvConfig& config) {
  ddpm::Observation obs;
  obs.geometry = config.patch;
  obs.frames = 1;
  obs.patch.assign(obs.geometry.cells(), 0);
  obs.goal = pose.to_local(goal);
  const int w = obs.geometry.width;
  for (int u = 0; u < w; ++u) {
    for (int v = 0; v < w; ++v) {
      const Vec2 world = pose.to_world(obs.geometry.cell_center(u, v));
      if (distance(world, pose.position) > config.sensor_range) continue;
      const Cell c = scene.grid.cell_of(world);
      if (!scene.grid.in_bounds(c) || !scene.grid.occupied(c)) continue;
      if (cell_visible(scene.grid, pose.position, c)) {
        obs.patch[static_cast<std::size_t>(u) * w + v] = 1;
      }
    }
  }
  return obs;
}

}  // namespace navgrpo::env
