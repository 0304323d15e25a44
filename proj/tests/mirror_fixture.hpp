#pragma once

// Random boards and poses for mirror-geometry properties, plus an
// independent ray/plane oracle.

#include <cmath>
#include <optional>
#include <random>

#include "mirrorboard/session.hpp"

namespace mirrorboard::testing {

inline double max_abs_diff(const Vec3& a, const Vec3& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return normalized(Vec3{n(rng), n(rng), n(rng)});
}

inline BoardPlane random_board(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3, 3);
  BoardPlane b;
  b.origin = {u(rng), u(rng), u(rng)};
  b.normal = random_unit(rng);
  return b;
}

// Pose on the normal side whose gaze ray is aimed at a random board point.
inline session::AvatarPose random_pose(std::mt19937_64& rng, const BoardPlane& b) {
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_real_distribution<double> dist(0.2, 4);
  session::AvatarPose p;
  p.user = "U";
  p.t_ms = 1;
  const Vec3 r = b.right_axis(), up = b.up_axis();
  p.position = b.origin + u(rng) * r + u(rng) * up + dist(rng) * b.normal;
  p.gaze_origin = p.position + Vec3{0, 0.05, 0};
  const Vec3 target = b.origin + u(rng) * r + u(rng) * up;
  p.gaze_dir = normalized(target - p.gaze_origin);
  p.forward = random_unit(rng);
  p.up = normalized(cross(p.forward, random_unit(rng)));
  return p;
}

// Oracle: intersection computed from the implicit plane equation, written
// independently of the library's helper.
inline std::optional<Vec3> oracle_hit(const Vec3& o, const Vec3& d, const BoardPlane& b) {
  const double nd = b.normal.x * d.x + b.normal.y * d.y + b.normal.z * d.z;
  if (std::abs(nd) < 1e-12) return std::nullopt;
  const double w = b.normal.x * (b.origin.x - o.x) + b.normal.y * (b.origin.y - o.y) + b.normal.z * (b.origin.z - o.z);
  const double t = w / nd;
  if (t < 0) return std::nullopt;
  return Vec3{o.x + t * d.x, o.y + t * d.y, o.z + t * d.z};
}

}  // namespace mirrorboard::testing
