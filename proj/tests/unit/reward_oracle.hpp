#pragma once

#include <algorithm>
#include <cmath>

#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/ddpm/trajectory.hpp"

namespace navgrpo::testing {

// Clean-room scorer: works from the raw patch bytes and world coordinates,
// dilates by brute-force cell-centre distance.
inline double oracle_total(const ddpm::Trajectory& traj, const ddpm::Observation& obs, Vec2 goal,
                           double radius) {
  const auto& g = obs.geometry;
  auto lookup = [&](Vec2 p, bool inflate) -> int {
    const long u = static_cast<long>(std::floor((p.x - g.x_min) / g.resolution));
    const long v = static_cast<long>(std::floor((p.y - g.y_min) / g.resolution));
    if (u < 0 || v < 0 || u >= g.width || v >= g.width) return 0;
    if (!inflate) return obs.patch[u * g.width + v];
    for (long a = 0; a < g.width; ++a) {
      for (long b = 0; b < g.width; ++b) {
        if (!obs.patch[a * g.width + b]) continue;
        const double du = (a - u) * g.resolution;
        const double dv = (b - v) * g.resolution;
        if (std::sqrt(du * du + dv * dv) <= radius + 1e-12) return 1;
      }
    }
    return 0;
  };
  const auto& p = traj.waypoints;
  const double H = static_cast<double>(p.size());
  const double dH = std::hypot(p.back().x - goal.x, p.back().y - goal.y);
  const double d0 = std::hypot(goal.x, goal.y);
  double coll = 0, infl = 0, smooth = 0, zz = 0;
  for (const auto& q : p) {
    coll += lookup(q, false);
    infl += lookup(q, true);
  }
  for (std::size_t i = 1; i < p.size(); ++i) smooth += std::hypot(p[i].x - p[i - 1].x, p[i].y - p[i - 1].y);
  for (std::size_t i = 2; i < p.size(); ++i) {
    const double a = p[i - 1].y - p[i - 2].y;
    const double b = p[i].y - p[i - 1].y;
    const int sa = a < 0 ? -1 : 1;
    const int sb = b < 0 ? -1 : 1;
    if (sa != sb) zz += 1;
  }
  return 10.0 * (dH < 0.3 ? 1 : 0) + 3.0 * std::max(0.0, d0 - dH) - 5.0 * coll / H -
         1.0 * infl / H - 0.1 * dH - 0.1 * smooth / (H - 1) - 0.05 * zz / (H - 1);
}

}  // namespace navgrpo::testing
