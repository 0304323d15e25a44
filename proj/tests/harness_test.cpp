#include "mirrorboard/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "mirrorboard/gaze_log.hpp"

using namespace mirrorboard;
using namespace mirrorboard::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mirrorboard_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// A short lesson: a pendulum driving a plot, a matrix, then a PAN that
// pushes most of it off the board.
constexpr const char* kShortLesson = R"({"name": "short", "duration": 12, "actions": [
  {"t": 0, "action": "create", "id": 1, "kind": "matrix", "at": [0.8,-0.5,0], "matrix": {"type": "scale", "args": [2]}},
  {"t": 0, "action": "create", "id": 2, "kind": "pendulum", "at": [-0.5,0.3,0], "theta0": 0.4, "omega": 3},
  {"t": 1, "action": "create", "id": 3, "kind": "plot", "at": [0.5,0.3,0]},
  {"t": 2, "action": "link", "from": 2, "to": 3},
  {"t": 8, "action": "pan", "delta": [-1.6,0,0]}]})";

ScenarioConfig short_scenario() {
  auto cfg = default_scenario(7, 4.0);
  cfg.script_source = "lesson.json";
  cfg.script = lecture::script_from_json(kShortLesson);
  return cfg;
}

const ScenarioResult& default_run() {
  static const ScenarioResult r = run_scenario(default_scenario(), scratch("default"));
  return r;
}

}  // namespace

TEST(Harness, DefaultScenarioPassesEveryCheck) {
  const auto& r = default_run();
  for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
  EXPECT_TRUE(r.ok());
  EXPECT_GT(r.render_events, 100u);
  EXPECT_EQ(r.snapshots.size(), 3u);
}

TEST(Harness, DefaultScenarioMatchesGolden) {
  const auto golden = slurp(fs::path(MIRRORBOARD_GOLDEN_DIR) / "matrix_lesson.board.txt");
  ASSERT_FALSE(golden.empty());
  for (const auto& [name, snap] : default_run().snapshots) EXPECT_EQ(snap, golden) << name;
}

TEST(Harness, PanCheckSeesProjectedDropBelowMr) {
  const auto& r = default_run();
  const auto it = std::find_if(r.checks.begin(), r.checks.end(),
                               [](const Check& c) { return c.name == "pan_projected_vs_mr"; });
  ASSERT_NE(it, r.checks.end());
  EXPECT_TRUE(it->pass);
  EXPECT_NE(it->detail.find("PROJECTED"), std::string::npos) << it->detail;
}

TEST(Harness, GazeProducesEyeContactBetweenPresenterAndAudience) {
  const auto& m = default_run().metrics;
  EXPECT_FALSE(m.events.empty());
  for (const auto& e : m.events) {
    EXPECT_TRUE(e.a == "P" || e.b == "P") << e.a << "/" << e.b;  // star topology: audience never meet
    EXPECT_GE(e.t_end - e.t_start, m.min_contact_ms);
  }
}

TEST(Harness, SameConfigGivesByteIdenticalArtifacts) {
  const auto cfg = short_scenario();
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_scenario(cfg, a);
  const auto rb = run_scenario(cfg, b);
  EXPECT_TRUE(ra.ok());
  EXPECT_TRUE(rb.ok());
  for (const auto& name : deterministic_artifacts(cfg)) {
    const auto x = slurp(a / name);
    EXPECT_FALSE(x.empty()) << name;
    EXPECT_EQ(x, slurp(b / name)) << name;
  }
}

TEST(Harness, DifferentSeedChangesGazeButNotBoard) {
  auto cfg = short_scenario();
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  const auto ra = run_scenario(cfg, a);
  cfg.seed = 8;
  const auto rb = run_scenario(cfg, b);
  EXPECT_EQ(ra.snapshots, rb.snapshots);
  EXPECT_NE(slurp(a / "gaze.jsonl"), slurp(b / "gaze.jsonl"));
}

TEST(Harness, ReplayReproducesMetrics) {
  const auto dir = scratch("replay");
  const auto r = run_scenario(short_scenario(), dir);
  const auto rep = replay(dir);
  EXPECT_TRUE(rep.matches);
  EXPECT_EQ(rep.recomputed, r.metrics);
  EXPECT_TRUE(replay(dir).matches);  // idempotent
}

TEST(Harness, ReplayDetectsTamperedLog) {
  const auto dir = scratch("tamper");
  run_scenario(default_scenario(3, 20.0), dir);
  auto log = gaze::gaze_log_from_jsonl(slurp(dir / "gaze.jsonl"));
  // Everyone stares at the board: no eye contact is possible any more.
  for (auto& s : log.samples) s.gaze_dir = normalized(log.session.board.origin - s.gaze_origin);
  spill(dir / "gaze.jsonl", gaze::gaze_log_to_jsonl(log));
  const auto rep = replay(dir);
  EXPECT_FALSE(rep.matches);
  EXPECT_TRUE(rep.recomputed.events.empty());
}

TEST(Harness, ReplayDetectsRemovedSample) {
  const auto dir = scratch("removed");
  run_scenario(short_scenario(), dir);
  auto log = gaze::gaze_log_from_jsonl(slurp(dir / "gaze.jsonl"));
  ASSERT_FALSE(log.samples.empty());
  log.samples.pop_back();
  spill(dir / "gaze.jsonl", gaze::gaze_log_to_jsonl(log));
  EXPECT_FALSE(replay(dir).matches);
}

TEST(Harness, ReplayMissingArtifactThrows) {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  EXPECT_THROW(replay(dir), MissingArtifact);
}

TEST(Harness, PresenterAloneRuns) {
  auto cfg = short_scenario();
  cfg.participants.resize(1);
  const auto r = run_scenario(cfg, scratch("alone"));
  for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
  EXPECT_TRUE(r.metrics.events.empty());
  EXPECT_EQ(r.metrics.users.at("P").eye_contact_count, 0);
}

TEST(Harness, ScenarioJsonRoundTripsAndResolvesScript) {
  const auto dir = scratch("roundtrip");
  fs::create_directories(dir);
  const auto cfg = short_scenario();
  spill(dir / "lesson.json", lecture::script_to_json(cfg.script));
  spill(dir / "s.json", scenario_to_json(cfg));
  const auto back = load_scenario(dir / "s.json");
  EXPECT_EQ(back.participants, cfg.participants);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.time_scale, cfg.time_scale);
  EXPECT_EQ(lecture::script_to_json(back.script), lecture::script_to_json(cfg.script));
}

TEST(Harness, ScenarioParseErrors) {
  const std::string p = R"({"name": "P", "role": "PRESENTER"})";
  const std::string a = R"({"name": "A", "role": "AUDIENCE"})";
  auto parse = [](const std::string& s) { return scenario_from_json(s); };
  EXPECT_NO_THROW(parse(R"({"participants": [)" + p + "," + a + "]}"));
  EXPECT_THROW(parse("{"), ScenarioError);
  EXPECT_THROW(parse("{}"), ScenarioError);
  EXPECT_THROW(parse(R"({"participants": [)" + a + "]}"), ScenarioError);                // no presenter
  EXPECT_THROW(parse(R"({"participants": [)" + p + "," + p + "]}"), ScenarioError);      // duplicate
  EXPECT_THROW(parse(R"({"cone_deg": 50, "participants": [)" + p + "]}"), ScenarioError);
  EXPECT_THROW(parse(R"({"time_scale": 0, "participants": [)" + p + "]}"), ScenarioError);
  EXPECT_THROW(parse(R"({"participants": [{"name": "P", "role": "PRESENTER", "transport": "udp"}]})"),
               ScenarioError);
  EXPECT_THROW(parse(R"({"participants": [{"name": "P", "role": "CHAIR"}]})"), ScenarioError);
  EXPECT_THROW(parse(R"({"participants": [{"name": "P", "role": "PRESENTER", "position": [0, 1.6, -1]}]})"),
               ScenarioError);  // behind the board
  EXPECT_THROW(parse(R"({"script": "nope.json", "participants": [)" + p + "]}"), lecture::ScriptParseError);
}
