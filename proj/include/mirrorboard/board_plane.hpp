#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "mirrorboard/vec3.hpp"

namespace mirrorboard {

/// The shared content plane. `normal` points toward the presenter's side;
/// `half_width`/`half_height` bound the projected-mode viewport.
struct BoardPlane {
  Vec3 origin{};
  Vec3 normal{0.0, 0.0, 1.0};
  double half_width = 2.0;
  double half_height = 1.25;

  double signed_distance(const Vec3& p) const { return dot(p - origin, normal); }

  /// In-plane horizontal axis: world up crossed with the normal, falling back
  /// to world x when the board lies flat.
  Vec3 right_axis() const {
    const Vec3 c = cross(Vec3{0.0, 1.0, 0.0}, normal);
    if (length(c) < 1e-12) return normalized(cross(normal, Vec3{0.0, 0.0, 1.0}));
    return normalized(c);
  }
  Vec3 up_axis() const { return cross(normal, right_axis()); }

  /// Point in board coordinates (right, up) after projecting onto the plane.
  std::pair<double, double> to_board_uv(const Vec3& p) const {
    const Vec3 rel = p - origin;
    return {dot(rel, right_axis()), dot(rel, up_axis())};
  }

  bool contains_uv(const Vec3& p) const {
    const auto [u, v] = to_board_uv(p);
    return u >= -half_width && u <= half_width && v >= -half_height && v <= half_height;
  }

  bool operator==(const BoardPlane&) const = default;
};

/// Board used by the reference scenario: plane z = 0, normal +z, 2.0 x 1.25 m half extents.
inline BoardPlane reference_board() { return BoardPlane{}; }

/// Reflection across the board plane.
inline Vec3 reflect_point(const Vec3& p, const BoardPlane& b) {
  return p - 2.0 * dot(p - b.origin, b.normal) * b.normal;
}
inline Vec3 reflect_direction(const Vec3& d, const BoardPlane& b) { return d - 2.0 * dot(d, b.normal) * b.normal; }

/// Forward ray-plane hit: nullopt when the ray is parallel (|dir.n| < 1e-9) or the plane lies behind.
inline std::optional<Vec3> intersect_ray_plane(const Vec3& origin, const Vec3& dir, const BoardPlane& b) {
  const double denom = dot(dir, b.normal);
  if (std::abs(denom) < 1e-9) return std::nullopt;
  const double t = dot(b.origin - origin, b.normal) / denom;
  if (t < 0.0) return std::nullopt;
  return origin + t * dir;
}

}  // namespace mirrorboard
