#pragma once

// Scripted behavior server: simulated sketches (pendulum, plot, matrices,
// cubes), link dataflow, and the per-frame render-command stream.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mirrorboard/board.hpp"
#include "mirrorboard/lecture.hpp"
#include "mirrorboard/mat4.hpp"

namespace mirrorboard::behavior {

/// Small-angle pendulum: theta0 * cos(omega * t).
double pendulum_value(double theta0, double omega, double t);

struct PendulumState {
  double theta0 = 0.0;
  double omega = 1.0;
  double t = 0.0;
};

inline double pendulum_value(const PendulumState& s) { return pendulum_value(s.theta0, s.omega, s.t); }

/// What travels along a link: a scalar (pendulum angle, plot sample) or a matrix.
using LinkValue = std::variant<double, Mat4>;

using SketchId = std::uint32_t;
using Link = std::pair<SketchId, SketchId>;

/// One synchronous propagation step. Every link (a, b), in the given order,
/// copies a's pre-frame output (if any) into b's input buffer. Outputs are
/// read from `outputs` only, so the result does not depend on receiver order
/// and cycles cannot run away.
std::map<SketchId, std::vector<LinkValue>> propagate_links(const std::vector<Link>& links,
                                                           const std::map<SketchId, LinkValue>& outputs);

enum class SketchKind { pendulum, plot, matrix, cube, freehand };

const char* to_string(SketchKind k);
SketchKind sketch_kind_from_string(std::string_view s);

struct SimSketch {
  SketchKind kind = SketchKind::freehand;
  Vec3 at{};
  // pendulum
  double theta0 = 0.0;
  double omega = 1.0;
  double t0 = 0.0;
  // plot: received samples; matrix: its value; cube: composed input product
  std::vector<double> samples;
  Mat4 matrix = Mat4::identity();

  std::optional<LinkValue> output(double t) const;
};

/// Pendulum excitation from a user stroke starting within this radius of the pivot.
inline constexpr double kExciteRadius = 0.3;
/// Radians per metre of horizontal stroke extent.
inline constexpr double kExciteGain = 1.0;
inline constexpr double kExciteClamp = 0.8;
/// Sketch ids handed out for user-drawn strokes.
inline constexpr SketchId kFirstUserSketchId = 1000;

struct EngineStats {
  std::uint64_t frames = 0;
  std::uint64_t commands = 0;
  std::uint64_t inputs_rejected = 0;
};

/// Deterministic stepper. Each step(t) runs, in order: script actions due at
/// or before t, queued client input, source evaluation, link propagation from
/// a snapshot of outputs, receiver updates. It returns one frame of render
/// commands bracketed by BEGIN_FRAME/END_FRAME.
class BehaviorEngine {
 public:
  explicit BehaviorEngine(lecture::LectureScript script);

  /// `t` is lesson time in seconds and must not decrease.
  std::vector<board::RenderCommand> step(double t);

  /// Queues a client input command for the next step. STROKE creates a
  /// freehand sketch (and may excite a pendulum); CURSOR and PAN pass through.
  void input(const std::string& user, const board::RenderCommand& c);

  bool finished(double t) const { return next_action_ >= script_.actions.size() && t >= script_.duration; }
  double duration() const { return script_.duration; }
  const std::map<SketchId, SimSketch>& sketches() const { return sketches_; }
  const std::vector<Link>& links() const { return links_; }
  const EngineStats& stats() const { return stats_; }

 private:
  void run_action(const lecture::Action& a, double t, std::vector<board::RenderCommand>& out);
  void create(SketchId id, SimSketch s, std::vector<board::RenderCommand>& out);
  void remove(SketchId id, std::vector<board::RenderCommand>& out);
  void handle_input(const board::RenderCommand& c, double t, std::vector<board::RenderCommand>& out);
  Mat4 transform_of(SketchId id, const SimSketch& s, double t) const;

  lecture::LectureScript script_;
  std::size_t next_action_ = 0;
  double last_t_ = 0.0;
  std::map<SketchId, SimSketch> sketches_;
  std::vector<Link> links_;  // creation order
  std::map<SketchId, Mat4> sent_transform_;
  std::vector<board::RenderCommand> pending_input_;
  SketchId next_user_id_ = kFirstUserSketchId;
  EngineStats stats_;
};

/// Frame times for a script compressed by `time_scale` at `tick_hz`: frame n
/// is at lesson time n * time_scale / tick_hz, and the last frame lands
/// exactly on the script duration.
std::vector<double> frame_times(double duration, double time_scale, double tick_hz = 60.0);

/// Runs the whole script straight into a Board (no relay).
board::BoardState replay_script(const lecture::LectureScript& script, double time_scale, double tick_hz = 60.0);

}  // namespace mirrorboard::behavior
