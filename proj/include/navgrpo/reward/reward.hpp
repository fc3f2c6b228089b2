#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "navgrpo/common/geometry.hpp"
#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/ddpm/trajectory.hpp"

namespace navgrpo::reward {

enum Component : int { Success, Progress, Collision, Inflated, Distance, Smoothness, ZigZag };
inline constexpr int kComponents = 7;
std::string_view component_name(int c);

struct RewardWeights {
  double success = 10.0;
  double progress = 3.0;
  double collision = -5.0;
  double inflated = -1.0;
  double distance = -0.1;
  double smoothness = -0.1;
  double zigzag = -0.05;

  std::array<double, kComponents> as_array() const {
    return {success, progress, collision, inflated, distance, smoothness, zigzag};
  }
  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct RewardConfig {
  RewardWeights weights;
  double success_threshold = 0.3;
  double inflation_radius = 0.3;
  // Waypoints that fall outside the sensed patch count as free.
  bool outside_is_free = true;

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

// Sensed occupancy of the newest frame and its disc dilation.
struct LocalOccupancy {
  ddpm::PatchGeometry geometry;
  std::vector<std::uint8_t> occ;
  std::vector<std::uint8_t> infl;

  bool occupied(int u, int v) const { return occ[index(u, v)] != 0; }
  bool inflated(int u, int v) const { return infl[index(u, v)] != 0; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(u) * geometry.width + v;
  }
};

LocalOccupancy build_local_occupancy(const ddpm::Observation& obs, double inflation_radius);

struct RewardBreakdown {
  std::array<double, kComponents> raw{};
  std::array<double, kComponents> weighted{};
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

// Trajectory and goal are in the robot frame; the robot sits at the origin.
RewardBreakdown score(const ddpm::Trajectory& traj, const LocalOccupancy& occ, Vec2 goal,
                      const RewardConfig& config);

std::vector<RewardBreakdown> score_group(std::span<const ddpm::Trajectory> trajs,
                                         const LocalOccupancy& occ, Vec2 goal,
                                         const RewardConfig& config);

}  // namespace navgrpo::reward
