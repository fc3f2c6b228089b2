#include "navgrpo/ddpm/observation.hpp"

#include <cmath>

#include "navgrpo/common/binary_io.hpp"

namespace navgrpo::ddpm {

std::optional<std::pair<int, int>> PatchGeometry::cell_of(Vec2 local) const {
  const double fu = std::floor((local.x - x_min) / resolution);
  const double fv = std::floor((local.y - y_min) / resolution);
  if (!(fu >= 0 && fu < width && fv >= 0 && fv < width)) return std::nullopt;
  return std::pair{static_cast<int>(fu), static_cast<int>(fv)};
}

std::uint64_t Observation::digest() const {
  ByteWriter w;
  w.put<std::int32_t>(frames);
  w.put<std::int32_t>(geometry.width);
  w.put_bytes(patch);
  w.put<double>(goal.x);
  w.put<double>(goal.y);
  return fnv1a(w.bytes());
}

void Observation::write(ByteWriter& w) const {
  w.put<std::int32_t>(frames);
  w.put<std::int32_t>(geometry.width);
  w.put<double>(geometry.resolution);
  w.put<double>(geometry.x_min);
  w.put<double>(geometry.y_min);
  w.put_bytes(patch);
  w.put<double>(goal.x);
  w.put<double>(goal.y);
}

Observation Observation::read(ByteReader& r) {
  Observation o;
  o.frames = r.get<std::int32_t>();
  o.geometry.width = r.get<std::int32_t>();
  o.geometry.resolution = r.get<double>();
  o.geometry.x_min = r.get<double>();
  o.geometry.y_min = r.get<double>();
  o.patch = r.get_bytes();
  o.goal.x = r.get<double>();
  o.goal.y = r.get<double>();
  return o;
}

}  // namespace navgrpo::ddpm
