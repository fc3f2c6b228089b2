#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "navgrpo/common/geometry.hpp"

namespace navgrpo::env {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Square-cell binary occupancy grid in the world frame. Cell (x, y) covers
// [x*cs, (x+1)*cs) x [y*cs, (y+1)*cs).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int width, int height, double cell_size);

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  // Out-of-bounds cells read as occupied.
  bool occupied(Cell c) const { return !in_bounds(c) || cells_[index(c)] != 0; }
  bool occupied(Vec2 world) const { return occupied(cell_of(world)); }
  void set(Cell c, bool occ) { cells_[index(c)] = occ ? 1 : 0; }

  Cell cell_of(Vec2 world) const;
  Vec2 center(Cell c) const { return {(c.x + 0.5) * cell_size_, (c.y + 0.5) * cell_size_}; }

  // Every cell within `radius` (world units, centre to centre) of an occupied
  // cell becomes occupied.
  OccupancyGrid inflated(double radius) const;

  const std::vector<std::uint8_t>& raw() const { return cells_; }
  std::uint64_t checksum() const;

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 1.0;
  std::vector<std::uint8_t> cells_;
};

struct GridPath {
  std::vector<Cell> cells;
  double cost = 0.0;  // in cell lengths
};

// 8-connected A* with unit orthogonal and sqrt(2) diagonal costs. Diagonal
// moves may not cut the corner of an occupied cell. Start and goal must be
// free.
std::optional<GridPath> shortest_grid_path(const OccupancyGrid& grid, Cell start, Cell goal);

}  // namespace navgrpo::env
