#pragma once

// Lecture scripts: timed presenter actions that drive the behavior server.
//
// File format (JSON):
//   {"name": "matrix-lesson", "duration": 600,
//    "actions": [
//      {"t": 0,   "action": "create", "id": 10, "kind": "pendulum", "at": [-1.2, 0.5, 0],
//                 "theta0": 0.5, "omega": 2},
//      {"t": 90,  "action": "create", "id": 2, "kind": "matrix", "at": [0.2, 0.6, 0],
//                 "matrix": {"type": "translation", "args": [1, 0, 0]}},
//      {"t": 120, "action": "link", "from": 2, "to": 1},
//      {"t": 130, "action": "move", "id": 1, "at": [0, 0, 0]},
//      {"t": 200, "action": "delete", "id": 10},
//      {"t": 240, "action": "cursor", "at": [0.1, 0.2, 0]},
//      {"t": 300, "action": "pan", "delta": [-3, 0, 0]},
//      {"t": 310, "action": "gesture", "target": "1", "duration": 3},
//      {"t": 320, "action": "deictic", "target": "1", "text": "this one"}]}
//
// Times are lesson seconds and must be nondecreasing and <= duration.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorboard/mat4.hpp"
#include "mirrorboard/vec3.hpp"

namespace mirrorboard::lecture {

class ScriptParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActionKind { create, move, link, remove, cursor, pan, gesture, deictic };

const char* to_string(ActionKind k);

/// Named matrix constructor, e.g. {"rotation_z", {pi/2}}.
struct MatrixSpec {
  std::string type = "identity";
  std::vector<double> args;

  bool operator==(const MatrixSpec&) const = default;
};

/// Throws ScriptParseError for unknown types or wrong argument counts.
Mat4 make_matrix(const MatrixSpec& spec);

struct Action {
  double t = 0.0;
  ActionKind kind = ActionKind::cursor;
  std::uint32_t id = 0;
  std::string sketch_kind;  // create
  Vec3 at{};                // create, move, cursor
  double theta0 = 0.0;      // pendulum
  double omega = 1.0;       // pendulum
  MatrixSpec matrix;        // matrix
  std::uint32_t from = 0;   // link
  std::uint32_t to = 0;     // link
  Vec3 delta{};             // pan
  std::string target;       // gesture, deictic
  std::string text;         // deictic
  double duration = 0.0;    // gesture

  bool operator==(const Action&) const = default;
};

struct LectureScript {
  std::string name;
  double duration = 0.0;
  std::vector<Action> actions;

  bool operator==(const LectureScript&) const = default;
};

/// Throws ScriptParseError.
LectureScript script_from_json(std::string_view text);
std::string script_to_json(const LectureScript& s);
LectureScript load_script(const std::string& path);

/// The ten-minute matrix lesson: a pendulum/plot warm-up, part 1 (cube plus
/// translation and rotation matrices applied through links), a PAN, and
/// part 2 (both composition orders side by side), with cursor moves,
/// gestures and deictic remarks throughout.
LectureScript generate_matrix_lesson();

}  // namespace mirrorboard::lecture
