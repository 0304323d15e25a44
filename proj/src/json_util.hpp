#pragma once

#include <stdexcept>

#include "json.hpp"
#include "mirrorboard/board_plane.hpp"
#include "mirrorboard/vec3.hpp"

namespace mirrorboard::detail {

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json to_json(const BoardPlane& b) {
  return {{"origin", to_json(b.origin)}, {"normal", to_json(b.normal)}, {"extents", {b.half_width, b.half_height}}};
}

inline BoardPlane board_from_json(const nlohmann::json& j) {
  BoardPlane b;
  if (j.contains("origin")) b.origin = vec3_from_json(j["origin"]);
  if (j.contains("normal")) b.normal = vec3_from_json(j["normal"]);
  if (j.contains("extents")) {
    b.half_width = j["extents"].at(0).get<double>();
    b.half_height = j["extents"].at(1).get<double>();
  }
  return b;
}

}  // namespace mirrorboard::detail
