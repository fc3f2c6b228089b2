#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "navgrpo/common/geometry.hpp"
#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/env/grid.hpp"

namespace navgrpo::env {

enum class Difficulty { Easy, Medium, Hard };
std::string_view difficulty_name(Difficulty d);
Difficulty parse_difficulty(std::string_view name);

struct EnvConfig {
  int arena_cells = 64;
  double cell_size = 0.25;
  double sensor_range = 8.0;
  ddpm::PatchGeometry patch;
  int frames = 1;
  double success_radius = 1.5;
  int n_exec = 4;
  int max_steps = 200;
  double robot_radius = 0.3;
  int tasks_per_scene = 25;
  double min_task_distance = 5.0;
  double max_task_distance = 12.0;
  // Negative: obstacle count follows the difficulty.
  int obstacle_override = -1;

  double motion_step() const { return cell_size / 4.0; }

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct Obstacle {
  enum class Kind { Box, Disc } kind = Kind::Box;
  Vec2 center;
  Vec2 half_extent;  // disc radius in x

  bool contains(Vec2 p) const;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct Task {
  Pose start;
  Vec2 goal;
  friend bool operator==(const Task& a, const Task& b) {
    return a.start.position == b.start.position && a.start.heading == b.start.heading &&
           a.goal == b.goal;
  }
};

struct Scene {
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::Easy;
  OccupancyGrid grid;
  std::vector<Obstacle> obstacles;
  std::vector<Task> tasks;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Pure function of (seed, difficulty, config). Throws GenerationError when
// the task constraints cannot be met after bounded retries.
Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const EnvConfig& config = {});

// 8-connected grid shortest path between the cells of two world points,
// in world units. Throws UsageError when unreachable.
double shortest_path_length(const Scene& scene, Vec2 start, Vec2 goal);

std::string export_scene(const Scene& scene);
Scene import_scene(std::string_view text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace navgrpo::env
