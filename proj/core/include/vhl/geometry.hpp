#pragma once

#include <cmath>

namespace vhl {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

struct Vec2 {
  double u = 0.0;
  double v = 0.0;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

constexpr double kPi = 3.14159265358979323846;

// Compass convention used throughout: heading 0 points along +y ("north"),
// heading pi/2 along +x ("east"); positive rotation is clockwise seen from
// above. Elevation is positive upward.
inline Vec3 direction_from_angles(double heading, double elevation) {
  const double ch = std::cos(elevation);
  return {std::sin(heading) * ch, std::cos(heading) * ch, std::sin(elevation)};
}

inline double heading_of(const Vec3& from, const Vec3& to) {
  return std::atan2(to.x - from.x, to.y - from.y);
}

inline double elevation_of(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double horiz = std::sqrt(d.x * d.x + d.y * d.y);
  return std::atan2(d.z, horiz);
}

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Wraps an angle to [0, 2*pi).
inline double wrap_angle_positive(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a;
}

}  // namespace vhl
