#include "navgrpo/env/scene.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/common/rng.hpp"

namespace navgrpo::env {

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

Difficulty parse_difficulty(std::string_view name) {
  if (name == "easy") return Difficulty::Easy;
  if (name == "medium") return Difficulty::Medium;
  if (name == "hard") return Difficulty::Hard;
  throw ConfigError("unknown difficulty '" + std::string(name) + "'");
}

bool Obstacle::contains(Vec2 p) const {
  const Vec2 d = p - center;
  if (kind == Kind::Disc) return d.norm() <= half_extent.x;
  return std::abs(d.x) <= half_extent.x && std::abs(d.y) <= half_extent.y;
}

namespace {

struct Profile {
  int primitives;
  double size_min;
  double size_max;
  int walls;  // long thin boxes forming corridors
  double disc_fraction;
};

Profile profile_for(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return {6, 0.4, 1.0, 0, 0.5};
    case Difficulty::Medium: return {9, 0.4, 1.1, 2, 0.5};
    case Difficulty::Hard: return {22, 0.3, 0.7, 1, 0.6};
  }
  return {};
}

std::vector<Obstacle> place_obstacles(Rng& rng, Difficulty difficulty, const EnvConfig& cfg) {
  const Profile prof = profile_for(difficulty);
  const double side = cfg.arena_cells * cfg.cell_size;
  const int count = cfg.obstacle_override >= 0 ? cfg.obstacle_override : prof.primitives;
  const int walls = cfg.obstacle_override >= 0 ? 0 : prof.walls;
  std::vector<Obstacle> out;
  for (int i = 0; i < count; ++i) {
    Obstacle o;
    o.kind = rng.uniform() < prof.disc_fraction ? Obstacle::Kind::Disc : Obstacle::Kind::Box;
    const double a = rng.uniform(prof.size_min, prof.size_max);
    const double b = rng.uniform(prof.size_min, prof.size_max);
    o.half_extent = o.kind == Obstacle::Kind::Disc ? Vec2{a, a} : Vec2{a, b};
    o.center = {rng.uniform(1.0, side - 1.0), rng.uniform(1.0, side - 1.0)};
    out.push_back(o);
  }
  for (int i = 0; i < walls; ++i) {
    Obstacle o;
    o.kind = Obstacle::Kind::Box;
    const double len = rng.uniform(2.0, 4.0);
    const double thick = rng.uniform(0.15, 0.3);
    o.half_extent = rng.uniform() < 0.5 ? Vec2{len, thick} : Vec2{thick, len};
    o.center = {rng.uniform(3.0, side - 3.0), rng.uniform(3.0, side - 3.0)};
    out.push_back(o);
  }
  return out;
}

OccupancyGrid rasterize(const std::vector<Obstacle>& obstacles, const EnvConfig& cfg) {
  OccupancyGrid grid(cfg.arena_cells, cfg.arena_cells, cfg.cell_size);
  const int n = cfg.arena_cells;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      bool occ = x == 0 || y == 0 || x == n - 1 || y == n - 1;
      const Vec2 c = grid.center({x, y});
      for (const auto& o : obstacles) occ = occ || o.contains(c);
      grid.set({x, y}, occ);
    }
  }
  return grid;
}

// Connected-component labels of free cells (8-connected, no corner cutting).
std::vector<int> components(const OccupancyGrid& grid) {
  const int w = grid.width();
  const int h = grid.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  int next = 0;
  std::vector<Cell> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (grid.occupied(Cell{x, y}) || label[y * w + x] >= 0) continue;
      label[y * w + x] = next;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const Cell nb{c.x + dx, c.y + dy};
            if (grid.occupied(nb) || label[nb.y * w + nb.x] >= 0) continue;
            if (dx != 0 && dy != 0 &&
                (grid.occupied(Cell{c.x + dx, c.y}) || grid.occupied(Cell{c.x, c.y + dy}))) {
              continue;
            }
            label[nb.y * w + nb.x] = next;
            stack.push_back(nb);
          }
        }
      }
      ++next;
    }
  }
  return label;
}

std::optional<std::vector<Task>> sample_tasks(Rng& rng, const OccupancyGrid& grid,
                                              const EnvConfig& cfg) {
  const OccupancyGrid safe = grid.inflated(cfg.robot_radius);
  const auto label = components(safe);
  std::vector<Cell> free_cells;
  for (int y = 0; y < safe.height(); ++y) {
    for (int x = 0; x < safe.width(); ++x) {
      if (!safe.occupied(Cell{x, y})) free_cells.push_back({x, y});
    }
  }
  if (free_cells.size() < 2) return std::nullopt;
  auto pick = [&] {
    return free_cells[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(free_cells.size()) - 1))];
  };
  auto jitter = [&](Cell c) {
    const double q = cfg.cell_size * 0.25;
    return grid.center(c) + Vec2{rng.uniform(-q, q), rng.uniform(-q, q)};
  };

  std::vector<Task> tasks;
  constexpr int kAttemptsPerTask = 2000;
  for (int t = 0; t < cfg.tasks_per_scene; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttemptsPerTask && !placed; ++attempt) {
      const Cell s = pick();
      const Cell g = pick();
      if (label[s.y * safe.width() + s.x] != label[g.y * safe.width() + g.x]) continue;
      const Vec2 sp = jitter(s);
      const Vec2 gp = jitter(g);
      const double d = distance(sp, gp);
      if (d < cfg.min_task_distance || d > cfg.max_task_distance) continue;
      if (safe.occupied(sp) || safe.occupied(gp)) continue;
      const Vec2 dir = gp - sp;
      const double heading =
          std::atan2(dir.y, dir.x) + rng.uniform(-std::numbers::pi / 3, std::numbers::pi / 3);
      tasks.push_back({{sp, heading}, gp});
      placed = true;
    }
    if (!placed) return std::nullopt;
  }
  return tasks;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, Difficulty difficulty, const EnvConfig& config) {
  if (config.arena_cells < 8 || config.tasks_per_scene < 1) {
    throw ConfigError("arena too small or no tasks requested");
  }
  constexpr int kLayoutAttempts = 25;
  for (int attempt = 0; attempt < kLayoutAttempts; ++attempt) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(difficulty),
                               static_cast<std::uint64_t>(attempt)}));
    Scene scene;
    scene.seed = seed;
    scene.difficulty = difficulty;
    scene.obstacles = place_obstacles(rng, difficulty, config);
    scene.grid = rasterize(scene.obstacles, config);
    auto tasks = sample_tasks(rng, scene.grid, config);
    if (!tasks) continue;
    scene.tasks = std::move(*tasks);
    return scene;
  }
  throw GenerationError("could not place connected tasks for scene seed " +
                        std::to_string(seed) + " (" + std::string(difficulty_name(difficulty)) +
                        ")");
}

double shortest_path_length(const Scene& scene, Vec2 start, Vec2 goal) {
  const auto path =
      shortest_grid_path(scene.grid, scene.grid.cell_of(start), scene.grid.cell_of(goal));
  if (!path) throw UsageError("goal unreachable from start");
  return path->cost * scene.grid.cell_size();
}

std::string export_scene(const Scene& scene) {
  std::ostringstream out;
  out.precision(17);
  out << "navgrpo-scene 1\n";
  out << "seed " << scene.seed << "\n";
  out << "difficulty " << difficulty_name(scene.difficulty) << "\n";
  const auto& g = scene.grid;
  out << "grid " << g.width() << " " << g.height() << " " << g.cell_size() << "\n";
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) out << (g.occupied(Cell{x, y}) ? '#' : '.');
    out << "\n";
  }
  out << "obstacles " << scene.obstacles.size() << "\n";
  for (const auto& o : scene.obstacles) {
    out << (o.kind == Obstacle::Kind::Disc ? "disc " : "box ") << o.center.x << " "
        << o.center.y << " " << o.half_extent.x << " " << o.half_extent.y << "\n";
  }
  out << "tasks " << scene.tasks.size() << "\n";
  for (const auto& t : scene.tasks) {
    out << "task " << t.start.position.x << " " << t.start.position.y << " " << t.start.heading
        << " " << t.goal.x << " " << t.goal.y << "\n";
  }
  return out.str();
}

Scene import_scene(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw IoError("scene file: expected '" + word + "'");
  };
  expect("navgrpo-scene");
  int version = 0;
  in >> version;
  if (version != 1) throw IoError("scene file: unsupported version");
  Scene s;
  std::string diff;
  expect("seed");
  in >> s.seed;
  expect("difficulty");
  in >> diff;
  s.difficulty = parse_difficulty(diff);
  int w = 0, h = 0;
  double cs = 0;
  expect("grid");
  in >> w >> h >> cs;
  if (!in) throw IoError("scene file: bad grid header");
  s.grid = OccupancyGrid(w, h, cs);
  for (int y = 0; y < h; ++y) {
    std::string row;
    in >> row;
    if (static_cast<int>(row.size()) != w) throw IoError("scene file: bad grid row");
    for (int x = 0; x < w; ++x) s.grid.set({x, y}, row[x] == '#');
  }
  std::size_t n = 0;
  expect("obstacles");
  in >> n;
  for (std::size_t i = 0; i < n; ++i) {
    std::string kind;
    Obstacle o;
    in >> kind >> o.center.x >> o.center.y >> o.half_extent.x >> o.half_extent.y;
    if (kind != "box" && kind != "disc") throw IoError("scene file: bad obstacle");
    o.kind = kind == "disc" ? Obstacle::Kind::Disc : Obstacle::Kind::Box;
    s.obstacles.push_back(o);
  }
  expect("tasks");
  in >> n;
  for (std::size_t i = 0; i < n; ++i) {
    Task t;
    expect("task");
    in >> t.start.position.x >> t.start.position.y >> t.start.heading >> t.goal.x >> t.goal.y;
    s.tasks.push_back(t);
  }
  if (!in) throw IoError("scene file: truncated");
  return s;
}

void save_scene(const Scene& scene, const std::string& path) {
  const std::string text = export_scene(scene);
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Scene load_scene(const std::string& path) {
  const auto bytes = read_file(path);
  return import_scene({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

}  // namespace navgrpo::env
