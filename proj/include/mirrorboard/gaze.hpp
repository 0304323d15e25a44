#pragma once

// Gaze analytics: board intersection, cone-based focus, focus intervals
// (NONE recorded explicitly), eye-contact events and summary metrics.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorboard/board_plane.hpp"
#include "mirrorboard/session.hpp"
#include "mirrorboard/vec3.hpp"

namespace mirrorboard::gaze {

inline constexpr const char* kNone = "NONE";
inline constexpr const char* kBoard = "BOARD";
inline constexpr double kDefaultConeDeg = 10.0;
inline constexpr std::int64_t kDefaultMinContactMs = 100;
inline constexpr std::int64_t kGapTimeoutMs = 500;

class UnsortedSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One gaze observation. `heads` holds the head positions the subject sees
/// at that instant, already in the subject's own frame (i.e. mirrored).
struct GazeSample {
  std::string user;
  std::int64_t t_ms = 0;
  Vec3 gaze_origin{};
  Vec3 gaze_dir{0, 0, -1};
  std::map<std::string, Vec3> heads;

  bool operator==(const GazeSample&) const = default;
};

struct FocusInterval {
  std::string subject;
  std::string target;  // user name, NONE or BOARD
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  auto operator<=>(const FocusInterval&) const = default;
};

struct EyeContactEvent {
  std::string a, b;  // a < b
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  std::int64_t duration() const { return t_end - t_start; }
  auto operator<=>(const EyeContactEvent&) const = default;
};

/// Forward ray hit on the (unbounded) board plane.
std::optional<Vec3> intersect_board(const GazeSample& s, const BoardPlane& board);

/// Users whose head lies within `cone_half_angle_deg` of the gaze ray.
/// Only keys of `candidates` are considered. Throws std::invalid_argument
/// unless the half-angle is in (0, 45) degrees.
std::set<std::string> classify_focus(const GazeSample& s, const std::map<std::string, Vec3>& candidates,
                                     double cone_half_angle_deg);

/// Per subject: run-length encodes the focus set over consecutive samples.
/// A run ends at the next sample's time, or at its own last sample when the
/// stream ends or the next sample is more than 500 ms away. Each run yields
/// one interval per focused user (NONE if empty); runs of board hits yield
/// BOARD intervals alongside. Candidates are restricted to users the subject
/// can see in `session`; subjects unknown to the session see every head.
/// Throws UnsortedSamples if a user's timestamps are not strictly increasing.
std::vector<FocusInterval> build_intervals(const std::vector<GazeSample>& samples, const session::SessionState& session,
                                           double cone_half_angle_deg = kDefaultConeDeg);

/// Connected components of mutual focus lasting at least `min_duration_ms`.
/// Touching intervals of one subject/target are merged first.
std::vector<EyeContactEvent> detect_eye_contact(const std::vector<FocusInterval>& intervals,
                                                std::int64_t min_duration_ms = kDefaultMinContactMs);

struct UserMetrics {
  std::int64_t eye_contact_count = 0;
  std::int64_t eye_contact_ms = 0;
  std::int64_t focus_shifts = 0;
  std::int64_t samples = 0;
  std::map<std::string, double> focus_fraction;  // target -> share of the session duration

  bool operator==(const UserMetrics&) const = default;
};

struct Metrics {
  std::int64_t duration_ms = 0;
  double cone_deg = kDefaultConeDeg;
  std::int64_t min_contact_ms = kDefaultMinContactMs;
  std::map<std::string, UserMetrics> users;
  std::vector<EyeContactEvent> events;

  bool operator==(const Metrics&) const = default;
};

/// Per user: eye-contact count/duration, per-target focus fraction and the
/// number of boundaries where the focused set changes.
Metrics summarize(const std::vector<FocusInterval>& intervals, const std::vector<EyeContactEvent>& events,
                  std::int64_t duration_ms);

/// Canonical JSON for metrics.json.
std::string metrics_to_json(const Metrics& m);
Metrics metrics_from_json(std::string_view text);

/// Full pipeline over a sample set.
Metrics analyze_samples(const std::vector<GazeSample>& samples, const session::SessionState& session,
                        double cone_deg, std::int64_t min_contact_ms, std::int64_t duration_ms);

}  // namespace mirrorboard::gaze
