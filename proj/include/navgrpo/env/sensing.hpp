#pragma once

#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/env/scene.hpp"

namespace navgrpo::env {

// Whether the centre of `target` can be seen from `eye`: samples every
// cell_size/4 along the segment and reports false if an occupied cell is met
// before the target's cell.
bool line_of_sight(const OccupancyGrid& grid, Vec2 eye, Vec2 target);

// A grid cell is visible when its centre or one of its corners (inset by 5%)
// has line of sight, so wall faces seen at grazing angles still register.
bool cell_visible(const OccupancyGrid& grid, Vec2 eye, Cell cell);

// Single-frame egocentric patch: a cell reads occupied only when the grid
// cell under its centre is occupied, within sensor range and visible.
ddpm::Observation observe(const Scene& scene, const Pose& pose, Vec2 goal,
                          const EnvConfig& config);

}  // namespace navgrpo::env
