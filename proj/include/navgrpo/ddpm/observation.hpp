#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/geometry.hpp"

namespace navgrpo::ddpm {

// Egocentric patch layout. Row u runs along the local x (forward) axis and
// column v along the local y (left) axis; cell (u, v) covers
// [x_min + u*res, x_min + (u+1)*res) x [y_min + v*res, y_min + (v+1)*res).
struct PatchGeometry {
  int width = 32;
  double resolution = 0.25;
  double x_min = -2.0;
  double y_min = -4.0;

  std::optional<std::pair<int, int>> cell_of(Vec2 local) const;
  Vec2 cell_center(int u, int v) const {
    return {x_min + (u + 0.5) * resolution, y_min + (v + 0.5) * resolution};
  }
  std::size_t cells() const { return static_cast<std::size_t>(width) * width; }

  friend bool operator==(const PatchGeometry&, const PatchGeometry&) = default;
};

// Policy input: sensed occupancy frames (newest first) plus the goal in the
// robot frame. Patch entries are 1 for sensed-occupied, 0 for free or unknown.
struct Observation {
  PatchGeometry geometry;
  int frames = 1;
  std::vector<std::uint8_t> patch;  // frames * width * width, row-major (u, v)
  Vec2 goal;

  std::uint8_t occupied(int u, int v, int frame = 0) const {
    return patch[static_cast<std::size_t>(frame) * geometry.cells() +
                 static_cast<std::size_t>(u) * geometry.width + v];
  }
  std::uint64_t digest() const;

  void write(ByteWriter& w) const;
  static Observation read(ByteReader& r);

  friend bool operator==(const Observation&, const Observation&) = default;
};

}  // namespace navgrpo::ddpm
