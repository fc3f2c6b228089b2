#include "navgrpo/env/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::env {

OccupancyGrid::OccupancyGrid(int width, int height, double cell_size)
    : width_(width), height_(height), cell_size_(cell_size) {
  if (width <= 0 || height <= 0 || !(cell_size > 0)) throw ConfigError("invalid grid dimensions");
  cells_.assign(static_cast<std::size_t>(width) * height, 0);
}

Cell OccupancyGrid::cell_of(Vec2 world) const {
  return {static_cast<int>(std::floor(world.x / cell_size_)),
          static_cast<int>(std::floor(world.y / cell_size_))};
}

OccupancyGrid OccupancyGrid::inflated(double radius) const {
  OccupancyGrid out = *this;
  const double r = radius / cell_size_;
  const int reach = static_cast<int>(std::floor(r));
  if (reach < 1) return out;
  std::vector<Cell> offsets;
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      if (dx * dx + dy * dy <= r * r) offsets.push_back({dx, dy});
    }
  }
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!cells_[index({x, y})]) continue;
      for (const Cell& o : offsets) {
        const Cell c{x + o.x, y + o.y};
        if (in_bounds(c)) out.set(c, true);
      }
    }
  }
  return out;
}

std::uint64_t OccupancyGrid::checksum() const {
  ByteWriter w;
  w.put<std::int32_t>(width_);
  w.put<std::int32_t>(height_);
  w.put<double>(cell_size_);
  w.put_bytes(cells_);
  return fnv1a(w.bytes());
}

std::optional<GridPath> shortest_grid_path(const OccupancyGrid& grid, Cell start, Cell goal) {
  if (grid.occupied(start) || grid.occupied(goal)) return std::nullopt;
  const int w = grid.width();
  const auto n = static_cast<std::size_t>(w) * grid.height();
  auto id = [w](Cell c) { return static_cast<std::size_t>(c.y) * w + c.x; };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double diag = std::sqrt(2.0);
  auto heuristic = [&](Cell c) {
    const int dx = std::abs(c.x - goal.x);
    const int dy = std::abs(c.y - goal.y);
    return (diag - 1.0) * std::min(dx, dy) + std::max(dx, dy);
  };

  std::vector<double> cost(n, kInf);
  std::vector<std::size_t> parent(n, n);
  std::vector<std::uint8_t> closed(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  cost[id(start)] = 0.0;
  open.emplace(heuristic(start), id(start));

  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    const Cell c{static_cast<int>(cur % w), static_cast<int>(cur / w)};
    if (c == goal) break;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell nb{c.x + dx, c.y + dy};
        if (grid.occupied(nb)) continue;
        if (dx != 0 && dy != 0 &&
            (grid.occupied(Cell{c.x + dx, c.y}) || grid.occupied(Cell{c.x, c.y + dy}))) {
          continue;
        }
        const double step = (dx != 0 && dy != 0) ? diag : 1.0;
        const std::size_t ni = id(nb);
        if (cost[cur] + step < cost[ni]) {
          cost[ni] = cost[cur] + step;
          parent[ni] = cur;
          open.emplace(cost[ni] + heuristic(nb), ni);
        }
      }
    }
  }
  if (cost[id(goal)] == kInf) return std::nullopt;
  GridPath path;
  path.cost = cost[id(goal)];
  for (std::size_t i = id(goal); i != n; i = parent[i]) {
    path.cells.push_back({static_cast<int>(i % w), static_cast<int>(i / w)});
    if (i == id(start)) break;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace navgrpo::env
