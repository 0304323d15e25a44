#pragma once

// End-to-end scenario runner: relay, behavior server and scripted
// participants in one process, driven by a virtual clock.
//
// Scenario file (JSON):
//   {"seed": 42, "time_scale": 20, "tick_hz": 60,
//    "script": "builtin:matrix-lesson" | "path/to/lesson.json",
//    "board": {"origin": [0,0,0], "normal": [0,0,1], "extents": [2.0, 1.25]},
//    "cone_deg": 10, "min_contact_ms": 100,
//    "participants": [
//      {"name": "P",  "role": "PRESENTER", "view": "MR",        "position": [0, 1.6, 2.0]},
//      {"name": "A1", "role": "AUDIENCE",  "view": "MR",        "position": [-0.6, 1.6, 2.2]},
//      {"name": "A2", "role": "AUDIENCE",  "view": "PROJECTED", "position": [0.6, 1.6, 2.2],
//       "transport": "websocket"}]}
//
// Artifacts written to the output directory:
//   scenario.json, lesson.json   inputs, normalized
//   gaze.jsonl                   gaze log (samples, intervals, events)
//   <name>.board.txt             each participant's final board snapshot
//   clients.jsonl                per frame and participant: visible items, rendered avatars
//   deliveries.jsonl             per frame: render/pose flakes emitted and received
//   metrics.json                 gaze metrics
//   checks.json                  end-to-end invariant results
//   relay_events.jsonl           relay diagnostics (registrations, disconnects); not
//                                covered by the determinism guarantee

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorboard/board.hpp"
#include "mirrorboard/client.hpp"
#include "mirrorboard/gaze.hpp"
#include "mirrorboard/lecture.hpp"
#include "mirrorboard/session.hpp"

namespace mirrorboard::harness {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParticipantSpec {
  std::string name;
  session::Role role = session::Role::audience;
  board::ViewMode view = board::ViewMode::mr;
  Vec3 position{0, 1.6, 2.0};
  relay::Transport transport = relay::Transport::stream;

  bool operator==(const ParticipantSpec&) const = default;
};

struct ScenarioConfig {
  std::uint64_t seed = 42;
  double time_scale = 20.0;
  double tick_hz = 60.0;
  std::string script_source = "builtin:matrix-lesson";
  lecture::LectureScript script;
  BoardPlane board = reference_board();
  double cone_deg = gaze::kDefaultConeDeg;
  std::int64_t min_contact_ms = gaze::kDefaultMinContactMs;
  std::vector<ParticipantSpec> participants;
};

/// Parses a scenario file; a relative script path resolves against `base_dir`.
/// Throws ScenarioError, or lecture::ScriptParseError for the script.
ScenarioConfig scenario_from_json(std::string_view text, const std::filesystem::path& base_dir = ".");
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

/// 1 presenter + 2 audience (one PROJECTED over WebSocket) running the matrix lesson.
ScenarioConfig default_scenario(std::uint64_t seed = 42, double time_scale = 20.0);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScenarioResult {
  std::vector<Check> checks;
  gaze::Metrics metrics;
  std::map<std::string, std::string> snapshots;  // participant -> final board snapshot
  std::uint64_t frames = 0;
  std::uint64_t render_events = 0;

  bool ok() const;
};

/// Runs the scenario end to end and writes the artifacts into `out_dir`
/// (created if needed). Throws relay::RelayError if the relay cannot start.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

struct ReplayResult {
  gaze::Metrics recomputed;
  bool matches = false;  // recomputed metrics serialize byte-identically to metrics.json
};

/// Recomputes metrics from gaze.jsonl. Throws MissingArtifact or gaze::SchemaMismatch.
ReplayResult replay(const std::filesystem::path& dir);

/// Artifacts whose bytes must be identical across runs with the same config.
std::vector<std::string> deterministic_artifacts(const ScenarioConfig& cfg);

}  // namespace mirrorboard::harness
