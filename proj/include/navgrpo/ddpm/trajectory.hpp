#pragma once

#include <vector>

#include "navgrpo/common/geometry.hpp"

namespace navgrpo::ddpm {

// H waypoints in the robot frame, world units.
struct Trajectory {
  std::vector<Vec2> waypoints;

  std::size_t size() const { return waypoints.size(); }
  const Vec2& operator[](std::size_t i) const { return waypoints[i]; }
  Vec2& operator[](std::size_t i) { return waypoints[i]; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace navgrpo::ddpm
