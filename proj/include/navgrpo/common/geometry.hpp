#pragma once

#include <cmath>

namespace navgrpo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Counter-clockwise rotation by angle (radians).
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Pose in the world frame: x forward along heading, y to the left.
struct Pose {
  Vec2 position;
  double heading = 0.0;

  Vec2 to_world(Vec2 local) const { return position + rotate(local, heading); }
  Vec2 to_local(Vec2 world) const { return rotate(world - position, -heading); }
};

}  // namespace navgrpo
