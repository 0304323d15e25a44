#pragma once

// Session roles, pose replication and the mirrored face-to-face view.
//
// Every participant stands on the normal side of the board in their own
// space. Remote participants are drawn reflected across the board plane, so
// each side reads the content non-reversed and a remote gaze ray still lands
// on the same board point. The reflected basis is left-handed; renderers
// rebuild right = forward x up.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mirrorboard/board_plane.hpp"
#include "mirrorboard/vec3.hpp"
#include "mirrorboard/wire.hpp"

namespace mirrorboard::session {

enum class SessionErrc {
  degenerate_pose,
  unknown_user,
  malformed_pose_payload,
  role_conflict,
  invalid_config,
};

const char* to_string(SessionErrc e);

class SessionError : public std::runtime_error {
 public:
  SessionError(SessionErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  SessionErrc code() const noexcept { return code_; }

 private:
  SessionErrc code_;
};

enum class Role { presenter, audience };

const char* to_string(Role r);
Role role_from_string(std::string_view s);

struct AvatarPose {
  std::string user;
  std::int64_t t_ms = 0;
  Vec3 position{};
  Vec3 forward{0.0, 0.0, -1.0};
  Vec3 up{0.0, 1.0, 0.0};
  Vec3 gaze_origin{};
  Vec3 gaze_dir{0.0, 0.0, -1.0};

  bool operator==(const AvatarPose&) const = default;
};

struct Participant {
  Role role = Role::audience;
  std::optional<AvatarPose> pose;

  bool operator==(const Participant&) const = default;
};

struct SessionState {
  BoardPlane board;
  std::map<std::string, Participant> participants;
  Vec3 pan_offset{};
  /// Unknown pose labels join as AUDIENCE when set.
  bool open_join = true;

  std::optional<std::string> presenter() const;
  bool operator==(const SessionState&) const = default;
};

/// Throws SessionError(role_conflict) when adding a second presenter or
/// re-adding an existing user.
void add_participant(SessionState& s, const std::string& user, Role role);

/// Checks the pose basis: unit forward/up/gaze_dir within 1e-6, forward.up within 1e-6.
bool is_valid_pose(const AvatarPose& p);

/// Reflects position, gaze origin and every direction across the board plane.
/// Throws SessionError(degenerate_pose) if the pose basis is invalid.
AvatarPose mirror_pose(const AvatarPose& p, const BoardPlane& board);

/// Users whose avatars `viewer` renders: the presenter sees every audience
/// member, an audience member sees only the presenter.
/// Throws SessionError(unknown_user).
std::set<std::string> visible_avatars(const SessionState& s, const std::string& viewer);

inline constexpr std::string_view kPoseLabelPrefix = "pose.";

std::string pose_label(std::string_view user);
/// "pose.<user>" -> user; nullopt for other labels or an empty user.
std::optional<std::string> user_from_pose_label(std::string_view label);

/// Pose payload: VEC3 x4 (position, forward, up, gaze_dir) with the gaze
/// origin at the head position, or VEC3 x5 with gaze_origin appended.
wire::Payload pose_payload(const AvatarPose& p);

/// Decodes a pose flake. The flake carries no clock, so the receiver supplies
/// `t_ms`. Directions are renormalized after the 32-bit float round trip.
/// Throws SessionError(malformed_pose_payload).
AvatarPose pose_from_flake(const wire::Flake& f, std::int64_t t_ms);

enum class PoseUpdateResult { replaced, stale, joined };

/// In-place form: returns what happened to the state.
PoseUpdateResult apply_pose_update_in_place(SessionState& s, const wire::Flake& f, std::int64_t t_ms);

/// Replaces the sender's latest pose iff `t_ms` is newer. Stale updates leave
/// the state unchanged. Unknown senders join as AUDIENCE in open-join mode,
/// otherwise SessionError(unknown_user).
SessionState apply_pose_update(SessionState s, const wire::Flake& f, std::int64_t t_ms);

/// Session config file:
/// {"board": {"origin": [x,y,z], "normal": [x,y,z], "extents": [hw, hh]},
///  "roles": {"P": "PRESENTER", "A": "AUDIENCE"}, "open_join": true}
SessionState session_from_json(std::string_view json);
std::string session_to_json(const SessionState& s);

}  // namespace mirrorboard::session
