#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace hdivfwd {

using Vec3 = std::array<double, 3>;

/// Grid axis; also the normal direction of a face.
enum class Axis : std::uint8_t { x = 0, y = 1, z = 2 };

inline constexpr Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline constexpr Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline constexpr Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline constexpr double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline constexpr Vec3 unit_vector(Axis axis) {
  Vec3 n{0.0, 0.0, 0.0};
  n[static_cast<int>(axis)] = 1.0;
  return n;
}

}  // namespace hdivfwd
