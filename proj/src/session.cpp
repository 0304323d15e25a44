#include "mirrorboard/session.hpp"

#include <cmath>

#include "json_util.hpp"

namespace mirrorboard::session {

namespace {

constexpr double kUnitTol = 1e-6;

bool is_unit(const Vec3& v) { return std::abs(length(v) - 1.0) <= kUnitTol; }

wire::Vec3f to_f(const Vec3& v) {
  return {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
}
Vec3 from_f(const wire::Vec3f& v) { return {v[0], v[1], v[2]}; }

Vec3 unit_or_throw(const Vec3& v, const char* what) {
  const double len = length(v);
  if (!std::isfinite(len) || len < 1e-6)
    throw SessionError(SessionErrc::malformed_pose_payload, std::string(what) + " is degenerate");
  return v / len;
}

}  // namespace

const char* to_string(SessionErrc e) {
  switch (e) {
    case SessionErrc::degenerate_pose: return "DegeneratePose";
    case SessionErrc::unknown_user: return "UnknownUser";
    case SessionErrc::malformed_pose_payload: return "MalformedPosePayload";
    case SessionErrc::role_conflict: return "RoleConflict";
    case SessionErrc::invalid_config: return "InvalidConfig";
  }
  return "Unknown";
}

const char* to_string(Role r) { return r == Role::presenter ? "PRESENTER" : "AUDIENCE"; }

Role role_from_string(std::string_view s) {
  if (s == "PRESENTER") return Role::presenter;
  if (s == "AUDIENCE") return Role::audience;
  throw SessionError(SessionErrc::invalid_config, "unknown role '" + std::string(s) + "'");
}

std::optional<std::string> SessionState::presenter() const {
  for (const auto& [name, p] : participants)
    if (p.role == Role::presenter) return name;
  return std::nullopt;
}

void add_participant(SessionState& s, const std::string& user, Role role) {
  if (s.participants.contains(user)) throw SessionError(SessionErrc::role_conflict, "user '" + user + "' already joined");
  if (role == Role::presenter && s.presenter())
    throw SessionError(SessionErrc::role_conflict, "session already has presenter '" + *s.presenter() + "'");
  s.participants[user] = Participant{role, std::nullopt};
}

bool is_valid_pose(const AvatarPose& p) {
  for (const Vec3* v : {&p.position, &p.forward, &p.up, &p.gaze_origin, &p.gaze_dir})
    if (!is_finite(*v)) return false;
  return is_unit(p.forward) && is_unit(p.up) && is_unit(p.gaze_dir) && std::abs(dot(p.forward, p.up)) <= kUnitTol;
}

AvatarPose mirror_pose(const AvatarPose& p, const BoardPlane& board) {
  if (!is_valid_pose(p)) throw SessionError(SessionErrc::degenerate_pose, "pose of '" + p.user + "' has an invalid basis");
  AvatarPose m = p;
  m.position = reflect_point(p.position, board);
  m.gaze_origin = reflect_point(p.gaze_origin, board);
  m.forward = normalized(reflect_direction(p.forward, board));
  m.up = normalized(reflect_direction(p.up, board));
  m.gaze_dir = normalized(reflect_direction(p.gaze_dir, board));
  return m;
}

std::set<std::string> visible_avatars(const SessionState& s, const std::string& viewer) {
  auto it = s.participants.find(viewer);
  if (it == s.participants.end()) throw SessionError(SessionErrc::unknown_user, "unknown user '" + viewer + "'");
  std::set<std::string> out;
  if (it->second.role == Role::presenter) {
    for (const auto& [name, p] : s.participants)
      if (p.role == Role::audience) out.insert(name);
  } else if (auto presenter = s.presenter()) {
    out.insert(*presenter);
  }
  return out;
}

std::string pose_label(std::string_view user) { return std::string(kPoseLabelPrefix) + std::string(user); }

std::optional<std::string> user_from_pose_label(std::string_view label) {
  if (!label.starts_with(kPoseLabelPrefix) || label.size() == kPoseLabelPrefix.size()) return std::nullopt;
  return std::string(label.substr(kPoseLabelPrefix.size()));
}

wire::Payload pose_payload(const AvatarPose& p) {
  std::vector<wire::Vec3f> v = {to_f(p.position), to_f(p.forward), to_f(p.up), to_f(p.gaze_dir)};
  if (p.gaze_origin != p.position) v.push_back(to_f(p.gaze_origin));
  return wire::Payload::vec3(std::move(v));
}

AvatarPose pose_from_flake(const wire::Flake& f, std::int64_t t_ms) {
  auto user = user_from_pose_label(f.label);
  if (!user) throw SessionError(SessionErrc::malformed_pose_payload, "label '" + f.label + "' is not pose.<user>");
  const auto* v = f.payload.as_vec3();
  if (!v || (v->size() != 4 && v->size() != 5))
    throw SessionError(SessionErrc::malformed_pose_payload, "pose payload must be VEC3 x4 or x5");
  for (const auto& e : *v)
    for (float c : e)
      if (!std::isfinite(c)) throw SessionError(SessionErrc::malformed_pose_payload, "non-finite pose component");

  AvatarPose p;
  p.user = *user;
  p.t_ms = t_ms;
  p.position = from_f((*v)[0]);
  p.forward = unit_or_throw(from_f((*v)[1]), "forward");
  // Re-orthogonalize up against forward; float rounding leaves ~1e-7 skew.
  Vec3 up = from_f((*v)[2]);
  up = up - dot(up, p.forward) * p.forward;
  p.up = unit_or_throw(up, "up");
  p.gaze_dir = unit_or_throw(from_f((*v)[3]), "gaze_dir");
  p.gaze_origin = v->size() == 5 ? from_f((*v)[4]) : p.position;
  return p;
}

PoseUpdateResult apply_pose_update_in_place(SessionState& s, const wire::Flake& f, std::int64_t t_ms) {
  AvatarPose pose = pose_from_flake(f, t_ms);
  auto result = PoseUpdateResult::replaced;
  auto it = s.participants.find(pose.user);
  if (it == s.participants.end()) {
    if (!s.open_join) throw SessionError(SessionErrc::unknown_user, "unknown user '" + pose.user + "'");
    it = s.participants.emplace(pose.user, Participant{Role::audience, std::nullopt}).first;
    result = PoseUpdateResult::joined;
  }
  if (it->second.pose && it->second.pose->t_ms >= t_ms) return PoseUpdateResult::stale;
  it->second.pose = std::move(pose);
  return result;
}

SessionState apply_pose_update(SessionState s, const wire::Flake& f, std::int64_t t_ms) {
  apply_pose_update_in_place(s, f, t_ms);
  return s;
}

SessionState session_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SessionState s;
    if (j.contains("board")) s.board = detail::board_from_json(j["board"]);
    if (std::abs(length(s.board.normal) - 1.0) > 1e-9 || s.board.half_width <= 0 || s.board.half_height <= 0)
      throw SessionError(SessionErrc::invalid_config, "board normal must be unit and extents positive");
    s.open_join = j.value("open_join", true);
    if (j.contains("roles"))
      for (const auto& [user, role] : j["roles"].items()) add_participant(s, user, role_from_string(role.get<std::string>()));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SessionError(SessionErrc::invalid_config, std::string("bad session config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SessionError(SessionErrc::invalid_config, std::string("bad session config: ") + e.what());
  }
}

std::string session_to_json(const SessionState& s) {
  nlohmann::json j;
  j["board"] = detail::to_json(s.board);
  j["open_join"] = s.open_join;
  j["roles"] = nlohmann::json::object();
  for (const auto& [name, p] : s.participants) j["roles"][name] = to_string(p.role);
  return j.dump();
}

}  // namespace mirrorboard::session
