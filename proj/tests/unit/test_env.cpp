#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "doctest.h"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/env/episode.hpp"
#include "navgrpo/env/sensing.hpp"

using namespace navgrpo;
using namespace navgrpo::env;

namespace {

Scene empty_scene(const EnvConfig& cfg = {}) {
  EnvConfig c = cfg;
  c.obstacle_override = 0;
  return generate_scene(7, Difficulty::Easy, c);
}

// Scene with a single wall of cells at grid column `col`.
Scene wall_scene(int col) {
  Scene s = empty_scene();
  for (int y = 1; y < s.grid.height() - 1; ++y) s.grid.set({col, y}, true);
  return s;
}

// Per-cell ray march written against world coordinates only.
std::vector<std::uint8_t> visibility_oracle(const Scene& scene, const Pose& pose,
                                            const EnvConfig& cfg) {
  const auto& g = cfg.patch;
  const double cs = scene.grid.cell_size();
  auto cell = [&](double x, double y) {
    return std::pair<long, long>{static_cast<long>(std::floor(x / cs)),
                                 static_cast<long>(std::floor(y / cs))};
  };
  auto occ = [&](std::pair<long, long> c) {
    if (c.first < 0 || c.second < 0 || c.first >= scene.grid.width() ||
        c.second >= scene.grid.height()) {
      return true;
    }
    return scene.grid.raw()[c.second * scene.grid.width() + c.first] != 0;
  };
  const double ch = std::cos(pose.heading);
  const double sh = std::sin(pose.heading);
  std::vector<std::uint8_t> out(g.cells(), 0);
  for (int u = 0; u < g.width; ++u) {
    for (int v = 0; v < g.width; ++v) {
      const double lx = g.x_min + (u + 0.5) * g.resolution;
      const double ly = g.y_min + (v + 0.5) * g.resolution;
      const double wx = pose.position.x + ch * lx - sh * ly;
      const double wy = pose.position.y + sh * lx + ch * ly;
      const double dx = wx - pose.position.x;
      const double dy = wy - pose.position.y;
      const double d = std::sqrt(dx * dx + dy * dy);
      const auto target = cell(wx, wy);
      if (d > cfg.sensor_range || !occ(target)) continue;
      bool inside = target.first >= 0 && target.second >= 0 &&
                    target.first < scene.grid.width() && target.second < scene.grid.height();
      if (!inside) continue;
      // Rays to the cell centre and four inset corners; visible if any ray
      // crosses no occupied cell before entering the target.
      bool visible = false;
      const double offs[5][2] = {{0, 0}, {-0.45, -0.45}, {0.45, -0.45}, {-0.45, 0.45}, {0.45, 0.45}};
      for (const auto& o : offs) {
        const double tx = (target.first + 0.5 + o[0]) * cs;
        const double ty = (target.second + 0.5 + o[1]) * cs;
        const double rx = tx - pose.position.x;
        const double ry = ty - pose.position.y;
        const int n = static_cast<int>(std::ceil(std::sqrt(rx * rx + ry * ry) / (cs / 4)));
        bool clear = true;
        for (int j = 1; j < n; ++j) {
          const auto c = cell(pose.position.x + rx * j / n, pose.position.y + ry * j / n);
          if (c == target) break;
          if (occ(c)) {
            clear = false;
            break;
          }
        }
        if (clear) {
          visible = true;
          break;
        }
      }
      out[static_cast<std::size_t>(u) * g.width + v] = visible;
    }
  }
  return out;
}

// Plain Dijkstra on a grid refined by 2 in each direction.
double refined_dijkstra(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
  const int w = grid.width() * 2;
  const int h = grid.height() * 2;
  const double cs = grid.cell_size() / 2;
  auto blocked = [&](int x, int y) {
    return x < 0 || y < 0 || x >= w || y >= h || grid.occupied(Cell{x / 2, y / 2});
  };
  std::vector<double> dist(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  const int sx = static_cast<int>(a.x / cs), sy = static_cast<int>(a.y / cs);
  const int gx = static_cast<int>(b.x / cs), gy = static_cast<int>(b.y / cs);
  dist[sy * w + sx] = 0;
  q.emplace(0.0, sy * w + sx);
  while (!q.empty()) {
    auto [d, i] = q.top();
    q.pop();
    if (d > dist[i]) continue;
    const int x = i % w, y = i / w;
    if (x == gx && y == gy) return d * cs;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if ((dx == 0 && dy == 0) || blocked(x + dx, y + dy)) continue;
        if (dx && dy && (blocked(x + dx, y) || blocked(x, y + dy))) continue;
        const double nd = d + ((dx && dy) ? std::sqrt(2.0) : 1.0);
        const int j = (y + dy) * w + x + dx;
        if (nd < dist[j]) {
          dist[j] = nd;
          q.emplace(nd, j);
        }
      }
    }
  }
  return std::numeric_limits<double>::infinity();
}

ddpm::Trajectory local_line(Vec2 to, int h) {
  ddpm::Trajectory t;
  for (int i = 1; i <= h; ++i) t.waypoints.push_back(to * (double(i) / h));
  return t;
}

}  // namespace

TEST_CASE("scene generation") {
  SUBCASE("pure function of seed and difficulty") {
    for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
      const auto a = generate_scene(11, d);
      const auto b = generate_scene(11, d);
      CHECK(a.grid.checksum() == b.grid.checksum());
      CHECK(a == b);
      CHECK(generate_scene(12, d).grid.checksum() != a.grid.checksum());
    }
  }
  SUBCASE("walled arena") {
    const auto s = generate_scene(3, Difficulty::Hard);
    const int n = s.grid.width();
    for (int i = 0; i < n; ++i) {
      CHECK(s.grid.occupied(Cell{i, 0}));
      CHECK(s.grid.occupied(Cell{i, n - 1}));
      CHECK(s.grid.occupied(Cell{0, i}));
      CHECK(s.grid.occupied(Cell{n - 1, i}));
    }
  }
  SUBCASE("empty arena tasks are straight-line feasible") {
    const auto s = empty_scene();
    CHECK(s.obstacles.empty());
    REQUIRE(s.tasks.size() == 25);
    for (const auto& t : s.tasks) {
      for (int j = 0; j <= 400; ++j) {
        const Vec2 p = t.start.position + (t.goal - t.start.position) * (j / 400.0);
        CHECK_FALSE(s.grid.occupied(p));
      }
    }
  }
  SUBCASE("every task of 100 medium scenes is connected") {
    int tasks = 0;
    for (std::uint64_t seed = 100; seed < 200; ++seed) {
      const auto s = generate_scene(seed, Difficulty::Medium);
      for (const auto& t : s.tasks) {
        CHECK_FALSE(s.grid.occupied(t.start.position));
        CHECK_FALSE(s.grid.occupied(t.goal));
        const double d = distance(t.start.position, t.goal);
        CHECK(d >= 5.0);
        CHECK(d <= 12.0);
        CHECK(std::isfinite(shortest_path_length(s, t.start.position, t.goal)));
        ++tasks;
      }
    }
    CHECK(tasks == 2500);
  }
  SUBCASE("difficulty raises obstacle density") {
    auto fill = [](Difficulty d) {
      double occ = 0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto& raw = generate_scene(seed, d).grid.raw();
        occ += std::count(raw.begin(), raw.end(), 1);
      }
      return occ;
    };
    CHECK(fill(Difficulty::Easy) < fill(Difficulty::Hard));
  }
  SUBCASE("impossible constraints report the seed") {
    EnvConfig cfg;
    cfg.min_task_distance = 30.0;
    cfg.max_task_distance = 40.0;
    CHECK_THROWS_WITH_AS(generate_scene(42, Difficulty::Easy, cfg),
                         doctest::Contains("seed 42"), GenerationError);
  }
  SUBCASE("export and import round trip") {
    const auto s = generate_scene(5, Difficulty::Hard);
    CHECK(import_scene(export_scene(s)) == s);
    CHECK_THROWS_AS(import_scene("navgrpo-scene 2\n"), IoError);
  }
}

TEST_CASE("shortest path length") {
  const auto s = empty_scene();
  const double cs = s.grid.cell_size();
  const Vec2 a = s.grid.center({10, 10});
  CHECK(shortest_path_length(s, a, s.grid.center({11, 10})) == doctest::Approx(cs));
  CHECK(shortest_path_length(s, a, s.grid.center({13, 14})) ==
        doctest::Approx((3 * std::sqrt(2.0) + 1) * cs));

  SUBCASE("agrees with a refined-grid Dijkstra") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto sc = generate_scene(seed, seed % 2 ? Difficulty::Hard : Difficulty::Medium);
      for (std::size_t i = 0; i < sc.tasks.size(); i += 5) {
        const auto& t = sc.tasks[i];
        const double l = shortest_path_length(sc, t.start.position, t.goal);
        const double ref = refined_dijkstra(sc.grid, t.start.position, t.goal);
        CHECK(std::abs(l - ref) <= 0.1 * ref);
      }
    }
  }
  SUBCASE("unreachable goal is an error") {
    auto boxed = wall_scene(30);
    CHECK_THROWS_AS(shortest_path_length(boxed, boxed.grid.center({10, 10}),
                                         boxed.grid.center({50, 10})),
                    UsageError);
  }
}

TEST_CASE("observation") {
  EnvConfig cfg;
  SUBCASE("goal ahead in the local frame") {
    const auto s = empty_scene();
    const Pose pose{{8.0, 8.0}, 0.7};
    const Vec2 goal = pose.to_world({2.0, 0.0});
    const auto obs = observe(s, pose, goal, cfg);
    CHECK(obs.goal.x == doctest::Approx(2.0));
    CHECK(obs.goal.y == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("wall ahead occludes what lies behind") {
    auto s = wall_scene(40);
    for (int y = 1; y < s.grid.height() - 1; ++y) s.grid.set({42, y}, true);
    const Pose pose{{8.5, 8.0}, 0.0};  // lattice-aligned; wall at x in [10, 10.25)
    const auto obs = observe(s, pose, {12, 8}, cfg);
    int wall_seen = 0;
    for (int u = 0; u < cfg.patch.width; ++u) {
      for (int v = 0; v < cfg.patch.width; ++v) {
        const Vec2 w = pose.to_world(cfg.patch.cell_center(u, v));
        const Cell c = s.grid.cell_of(w);
        if (c.x == 40 && std::abs(w.y - 8.0) < 1.2) {
          CHECK(obs.occupied(u, v) == 1);
          ++wall_seen;
        }
        if (c.x == 42) CHECK(obs.occupied(u, v) == 0);
      }
    }
    CHECK(wall_seen > 0);
  }
  SUBCASE("visibility matches a ray-march oracle on random poses") {
    Rng rng(99);
    for (int i = 0; i < 20; ++i) {
      const auto sc = generate_scene(static_cast<std::uint64_t>(i), Difficulty::Hard);
      Vec2 p;
      do {
        p = {rng.uniform(0.5, 15.5), rng.uniform(0.5, 15.5)};
      } while (sc.grid.occupied(p));
      const Pose pose{p, rng.uniform(-std::numbers::pi, std::numbers::pi)};
      const auto obs = observe(sc, pose, {8, 8}, cfg);
      CHECK(obs.patch == visibility_oracle(sc, pose, cfg));
    }
  }
}

TEST_CASE("waypoint execution") {
  EnvConfig cfg;
  const Vec2 far_goal{15.0, 15.0};
  SUBCASE("null motion") {
    const auto s = empty_scene();
    RobotState st{{{4.0, 4.0}, 0.3}, 1.25};
    ddpm::Trajectory t{std::vector<Vec2>(24, Vec2{0, 0})};
    const auto r = execute_waypoints(s, st, t, 4, far_goal, cfg);
    CHECK(r.state.pose.position == st.pose.position);
    CHECK(r.state.pose.heading == st.pose.heading);
    CHECK(r.state.path_length == 1.25);
    CHECK_FALSE(r.collided);
    CHECK_FALSE(r.reached_goal);
  }
  SUBCASE("arc length of a free straight run") {
    const auto s = empty_scene();
    RobotState st{{{3.0, 3.0}, std::numbers::pi / 2}, 0.0};
    const auto t = local_line({6.0, 0.0}, 24);
    const auto r = execute_waypoints(s, st, t, 4, far_goal, cfg);
    CHECK(r.state.path_length == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.state.pose.position.x == doctest::Approx(3.0));
    CHECK(r.state.pose.position.y == doctest::Approx(4.0));
    CHECK(r.state.pose.heading == doctest::Approx(std::numbers::pi / 2));
  }
  SUBCASE("stops before a wall and reports the first occupied sample") {
    const auto s = wall_scene(24);  // x in [6, 6.25)
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const Pose start{{rng.uniform(4.6, 5.9), rng.uniform(4, 12)}, rng.uniform(-0.6, 0.6)};
      RobotState st{start, 0.0};
      const auto t = local_line({rng.uniform(2.0, 4.0), rng.uniform(-1, 1)}, 8);
      const auto r = execute_waypoints(s, st, t, 8, far_goal, cfg);
      // Dense oracle at four times the execution resolution.
      double first_hit = -1;
      Vec2 prev = start.position;
      double acc = 0;
      for (int i = 0; i < 8 && first_hit < 0; ++i) {
        const Vec2 next = start.to_world(t[static_cast<std::size_t>(i)]);
        const int n = static_cast<int>(std::ceil(distance(prev, next) / (cfg.motion_step() / 4)));
        for (int j = 1; j <= n; ++j) {
          const Vec2 q = prev + (next - prev) * (double(j) / n);
          if (s.grid.occupied(q)) {
            first_hit = acc + distance(prev, q);
            break;
          }
        }
        acc += distance(prev, next);
        prev = next;
      }
      REQUIRE(first_hit > 0);
      CHECK(r.collided);
      CHECK(r.state.pose.position.x < 6.0);
      CHECK_FALSE(s.grid.occupied(r.state.pose.position));
      CHECK(s.grid.occupied(r.collision_point));
      CHECK(r.state.path_length < first_hit);
      CHECK(r.state.path_length > first_hit - 1.25 * cfg.motion_step());
    }
  }
  SUBCASE("goal check during motion") {
    const auto s = empty_scene();
    RobotState st{{{3.0, 3.0}, 0.0}, 0.0};
    const auto r = execute_waypoints(s, st, local_line({6.0, 0.0}, 24), 24, {6.0, 3.0}, cfg);
    CHECK(r.reached_goal);
    CHECK(distance(r.state.pose.position, {6.0, 3.0}) < cfg.success_radius);
    CHECK(r.state.path_length == doctest::Approx(1.5).epsilon(0.05));
  }
  CHECK_THROWS_AS(execute_waypoints(empty_scene(), {}, local_line({1, 0}, 4), 5, far_goal, cfg),
                  UsageError);
}

TEST_CASE("episodes") {
  EnvConfig cfg;
  reward::RewardConfig rcfg;
  Rng rng(1);
  SUBCASE("start inside the success radius") {
    const auto s = empty_scene();
    const Task task{{{5.0, 5.0}, 0.0}, {5.0, 5.5}};
    StraightPlanner planner(24, 0.25);
    const auto r = run_episode(planner, s, task, cfg, rcfg, rng);
    CHECK(r.success);
    CHECK(r.path_length == 0.0);
    CHECK(r.shortest_length > 0.0);
    CHECK(r.spl() == 1.0);
    CHECK(r.steps == 0);
  }
  SUBCASE("straight-to-goal in the empty arena") {
    const auto s = empty_scene();
    StraightPlanner planner(24, 0.25);
    for (const auto& task : s.tasks) {
      const auto r = run_episode(planner, s, task, cfg, rcfg, rng);
      CHECK(r.success);
      CHECK(r.cause == Termination::Goal);
      CHECK(r.spl() >= 0.95);
      CHECK(r.step_rewards.size() == static_cast<std::size_t>(r.steps));
    }
  }
  SUBCASE("timeout") {
    EnvConfig one = cfg;
    one.max_steps = 1;
    const auto s = empty_scene();
    StraightPlanner planner(24, 0.25);
    const auto r = run_episode(planner, s, s.tasks[0], one, rcfg, rng);
    CHECK_FALSE(r.success);
    CHECK(r.cause == Termination::Timeout);
    CHECK(r.spl() == 0.0);
    CHECK(r.steps == 1);
  }
  SUBCASE("SPL bounds and collision logging with a random planner") {
    RandomPlanner planner(24, 0.25);
    int collisions = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto sc = generate_scene(seed, Difficulty::Hard);
      for (const auto& task : sc.tasks) {
        const auto r = run_episode(planner, sc, task, cfg, rcfg, rng);
        CHECK(r.spl() >= 0.0);
        CHECK(r.spl() <= 1.0);
        if (!r.success) CHECK(r.spl() == 0.0);
        if (r.spl() == 1.0) CHECK(r.path_length <= r.shortest_length);
        collisions += r.cause == Termination::Collision;
        CHECK(r.success == (r.cause == Termination::Goal));
      }
    }
    CHECK(collisions > 0);
  }
}

TEST_CASE("frame history") {
  FrameHistory h(3);
  ddpm::Observation a;
  a.geometry.width = 2;
  a.patch = {1, 0, 0, 0};
  auto b = a;
  b.patch = {0, 1, 0, 0};
  const auto first = h.push(a);
  CHECK(first.frames == 3);
  CHECK(first.patch == std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0});
  const auto second = h.push(b);
  CHECK(second.patch == std::vector<std::uint8_t>{0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0});
}
