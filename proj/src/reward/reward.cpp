#include "navgrpo/reward/reward.hpp"

#include <cmath>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::reward {

std::string_view component_name(int c) {
  static constexpr std::string_view names[kComponents] = {
      "success", "progress", "collision", "inflated", "distance", "smoothness", "zigzag"};
  if (c < 0 || c >= kComponents) throw UsageError("reward component out of range");
  return names[c];
}

LocalOccupancy build_local_occupancy(const ddpm::Observation& obs, double inflation_radius) {
  if (!(inflation_radius >= 0.0)) throw ConfigError("inflation radius must be >= 0");
  LocalOccupancy out;
  out.geometry = obs.geometry;
  const int w = obs.geometry.width;
  out.occ.assign(obs.patch.begin(), obs.patch.begin() + static_cast<long>(obs.geometry.cells()));
  out.infl = out.occ;
  const double r = inflation_radius / obs.geometry.resolution;
  const int reach = static_cast<int>(std::floor(r));
  if (reach < 1) return out;
  for (int u = 0; u < w; ++u) {
    for (int v = 0; v < w; ++v) {
      if (!out.occupied(u, v)) continue;
      for (int du = -reach; du <= reach; ++du) {
        for (int dv = -reach; dv <= reach; ++dv) {
          const int uu = u + du;
          const int vv = v + dv;
          if (uu < 0 || vv < 0 || uu >= w || vv >= w) continue;
          if (du * du + dv * dv <= r * r) out.infl[out.index(uu, vv)] = 1;
        }
      }
    }
  }
  return out;
}

RewardBreakdown score(const ddpm::Trajectory& traj, const LocalOccupancy& occ, Vec2 goal,
                      const RewardConfig& config) {
  const auto& p = traj.waypoints;
  const std::size_t h = p.size();
  if (h < 2) throw UsageError("trajectory needs at least two waypoints");

  RewardBreakdown b;
  const double end_dist = distance(p.back(), goal);
  b.raw[Success] = end_dist < config.success_threshold ? 1.0 : 0.0;
  b.raw[Progress] = std::max(0.0, goal.norm() - end_dist);
  b.raw[Distance] = end_dist;

  int hits = 0;
  int inflated_hits = 0;
  for (const Vec2& q : p) {
    const auto cell = occ.geometry.cell_of(q);
    if (!cell) {
      if (!config.outside_is_free) {
        ++hits;
        ++inflated_hits;
      }
      continue;
    }
    hits += occ.occupied(cell->first, cell->second);
    inflated_hits += occ.inflated(cell->first, cell->second);
  }
  b.raw[Collision] = static_cast<double>(hits) / h;
  b.raw[Inflated] = static_cast<double>(inflated_hits) / h;

  double length = 0.0;
  for (std::size_t i = 0; i + 1 < h; ++i) length += distance(p[i + 1], p[i]);
  b.raw[Smoothness] = length / (h - 1);

  int flips = 0;
  auto positive = [](double dy) { return dy >= 0.0; };
  for (std::size_t i = 0; i + 2 < h; ++i) {
    flips += positive(p[i + 1].y - p[i].y) != positive(p[i + 2].y - p[i + 1].y);
  }
  b.raw[ZigZag] = static_cast<double>(flips) / (h - 1);

  const auto w = config.weights.as_array();
  for (int c = 0; c < kComponents; ++c) {
    b.weighted[c] = w[c] * b.raw[c];
    b.total += b.weighted[c];
  }
  return b;
}

std::vector<RewardBreakdown> score_group(std::span<const ddpm::Trajectory> trajs,
                                         const LocalOccupancy& occ, Vec2 goal,
                                         const RewardConfig& config) {
  std::vector<RewardBreakdown> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(score(t, occ, goal, config));
  return out;
}

}  // namespace navgrpo::reward
