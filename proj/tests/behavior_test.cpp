#include "mirrorboard/behavior.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

using namespace mirrorboard;
using namespace mirrorboard::behavior;
using board::Op;
using board::RenderCommand;
using lecture::ActionKind;

namespace {

constexpr double kPi = std::numbers::pi;

void expect_vec4_near(const Vec4& a, const Vec4& b, double tol) {
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], tol) << "component " << i;
}

Mat4 random_mat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2, 2);
  Mat4 m;
  for (double& x : m.m) x = u(rng);
  return m;
}

lecture::LectureScript chain_script() {
  return lecture::script_from_json(R"({"duration": 10, "actions": [
    {"t": 0, "action": "create", "id": 1, "kind": "pendulum", "at": [0,0,0], "theta0": 0.5, "omega": 2},
    {"t": 0, "action": "create", "id": 2, "kind": "plot", "at": [1,0,0]},
    {"t": 0, "action": "create", "id": 3, "kind": "plot", "at": [2,0,0]},
    {"t": 0, "action": "link", "from": 1, "to": 2},
    {"t": 0, "action": "link", "from": 2, "to": 3}]})");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kGolden = std::string(MIRRORBOARD_GOLDEN_DIR) + "/matrix_lesson.board.txt";

}  // namespace

TEST(Mat4, TranslationMovesOrigin) {
  expect_vec4_near(mat_apply(mat_translation(1, 0, 0), {0, 0, 0, 1}), {1, 0, 0, 1}, 0);
}

TEST(Mat4, QuarterTurnAboutZ) {
  expect_vec4_near(mat_apply(mat_rotation_z(kPi / 2), {1, 0, 0, 1}), {0, 1, 0, 1}, 1e-12);
}

TEST(Mat4, ZeroRotationIsIdentity) { EXPECT_EQ(mat_rotation_z(0), Mat4::identity()); }

TEST(Mat4, NonFiniteInputRejected) {
  EXPECT_THROW(mat_translation(std::nan(""), 0, 0), NonFiniteInput);
  EXPECT_THROW(mat_rotation_z(INFINITY), NonFiniteInput);
}

TEST(Mat4, TranslateAfterRotate) {
  const auto tr = mat_mul(mat_translation(1, 0, 0), mat_rotation_z(kPi / 2));
  expect_vec4_near(mat_apply(tr, {1, 0, 0, 1}), {1, 1, 0, 1}, 1e-12);
}

TEST(Mat4, RotateAfterTranslate) {
  const auto rt = mat_mul(mat_rotation_z(kPi / 2), mat_translation(1, 0, 0));
  expect_vec4_near(mat_apply(rt, {1, 0, 0, 1}), {0, 2, 0, 1}, 1e-12);
}

TEST(Mat4, LessonMatricesDoNotCommute) {
  const auto t = mat_translation(1, 0, 0), r = mat_rotation_z(kPi / 2);
  EXPECT_GT(max_abs_diff(mat_mul(t, r), mat_mul(r, t)), 0.1);
  const auto t2 = mat_translation(0, 2, -1);
  EXPECT_EQ(mat_mul(t, t2), mat_mul(t2, t));
}

TEST(Mat4Property, IdentityAssociativityOrthonormality) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(-10, 10);
  double worst_assoc = 0, worst_ortho = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_mat(rng), b = random_mat(rng), c = random_mat(rng);
    EXPECT_EQ(mat_mul(a, Mat4::identity()), a);
    EXPECT_EQ(mat_mul(Mat4::identity(), a), a);
    worst_assoc = std::max(worst_assoc, max_abs_diff(mat_mul(mat_mul(a, b), c), mat_mul(a, mat_mul(b, c))));
    for (auto rot : {mat_rotation_x, mat_rotation_y, mat_rotation_z}) {
      const auto r = rot(angle(rng));
      worst_ortho = std::max(worst_ortho, max_abs_diff(mat_mul(mat_transpose(r), r), Mat4::identity()));
    }
  }
  EXPECT_LE(worst_assoc, 1e-12);
  EXPECT_LE(worst_ortho, 1e-12);
}

TEST(Pendulum, Examples) {
  EXPECT_EQ(pendulum_value(0.5, 2.0, 0.0), 0.5);
  EXPECT_NEAR(pendulum_value(0.5, 2.0, kPi / 4), 0.0, 1e-12);
  // 0.5 cos(1.4) from an independent reference: 0.08498357145012052
  EXPECT_NEAR(pendulum_value(PendulumState{0.5, 2.0, 0.7}), 0.08498357145012052, 1e-15);
}

TEST(PendulumProperty, BoundedAndPeriodic) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> th(-1, 1), om(0.1, 10), t(0, 100);
  for (int i = 0; i < 10000; ++i) {
    const double a = th(rng), w = om(rng), x = t(rng);
    const double v = pendulum_value(a, w, x);
    EXPECT_LE(std::abs(v), std::abs(a));
    EXPECT_NEAR(pendulum_value(a, w, x + 2 * kPi / w), v, 1e-9);
  }
}

TEST(Propagation, ValueReachesPlot) {
  const auto in = propagate_links({{1, 2}}, {{1, 0.5}});
  ASSERT_EQ(in.at(2).size(), 1u);
  EXPECT_EQ(std::get<double>(in.at(2)[0]), 0.5);
}

TEST(Propagation, UnlinkedUnchanged) { EXPECT_TRUE(propagate_links({}, {{1, 0.5}}).empty()); }

TEST(Propagation, ReadsPreFrameOutputsInAnyOrder) {
  // A cycle: both sides read the other's old value, regardless of link order.
  const std::map<SketchId, LinkValue> outputs = {{1, 1.0}, {2, 2.0}};
  const auto a = propagate_links({{1, 2}, {2, 1}}, outputs);
  const auto b = propagate_links({{2, 1}, {1, 2}}, outputs);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::get<double>(a.at(1)[0]), 2.0);
  EXPECT_EQ(std::get<double>(a.at(2)[0]), 1.0);
}

TEST(Engine, ChainReachesSecondPlotOnFrameTwo) {
  BehaviorEngine e(chain_script());
  e.step(0.0);
  EXPECT_EQ(e.sketches().at(2).samples.size(), 1u);
  EXPECT_TRUE(e.sketches().at(3).samples.empty());
  e.step(1.0 / 60);
  ASSERT_EQ(e.sketches().at(3).samples.size(), 1u);
  EXPECT_EQ(e.sketches().at(3).samples[0], 0.5);  // frame-1 pendulum value, one hop later
}

TEST(Engine, FramesAreBracketed) {
  BehaviorEngine e(chain_script());
  for (int i = 0; i < 5; ++i) {
    const auto cmds = e.step(i / 60.0);
    EXPECT_EQ(cmds.front().op, Op::begin_frame);
    EXPECT_EQ(cmds.back().op, Op::end_frame);
  }
  EXPECT_THROW(e.step(0.0), std::invalid_argument);
}

TEST(Engine, CubeComposesInLinkOrder) {
  auto lesson = lecture::generate_matrix_lesson();
  BehaviorEngine e(lesson);
  for (double t : frame_times(lesson.duration, 20)) e.step(t);
  const auto t = mat_translation(1, 0, 0), r = mat_rotation_z(kPi / 2);
  EXPECT_LE(max_abs_diff(e.sketches().at(1).matrix, mat_mul(t, r)), 1e-15);
  EXPECT_LE(max_abs_diff(e.sketches().at(4).matrix, mat_mul(t, r)), 1e-15);
  EXPECT_LE(max_abs_diff(e.sketches().at(5).matrix, mat_mul(r, t)), 1e-15);
}

TEST(Engine, UserStrokeCreatesSketchAndExcitesPendulum) {
  BehaviorEngine e(chain_script());
  e.step(0.0);
  e.input("P", RenderCommand::stroke(0, board::Stroke{{1, 1, 1, 1}, 0.01f, {{0.1f, 0, 0}, {2.0f, 0, 0}}}));
  e.input("P", RenderCommand::cursor({0.5f, 0.5f, 0}));
  e.input("P", RenderCommand::create_sketch(5));  // not an input op
  const auto cmds = e.step(1.0);
  EXPECT_NE(std::find(cmds.begin(), cmds.end(), RenderCommand::create_sketch(kFirstUserSketchId)), cmds.end());
  EXPECT_NE(std::find(cmds.begin(), cmds.end(), RenderCommand::cursor({0.5f, 0.5f, 0})), cmds.end());
  EXPECT_EQ(e.stats().inputs_rejected, 1u);
  EXPECT_EQ(e.sketches().at(1).theta0, kExciteClamp);  // 1.9 m * 1 rad/m clamped
  EXPECT_EQ(e.sketches().at(1).t0, 1.0);
}

TEST(FrameTimes, EndsExactlyOnDuration) {
  const auto ts = frame_times(600, 20);
  EXPECT_EQ(ts.size(), 1801u);
  EXPECT_EQ(ts.back(), 600.0);
  EXPECT_EQ(ts[360], 120.0);
  EXPECT_EQ(frame_times(1.0, 7).back(), 1.0);
}

TEST(Lesson, ContentAndDeterminism) {
  const auto a = lecture::generate_matrix_lesson();
  EXPECT_EQ(a, lecture::generate_matrix_lesson());
  auto count = [&](ActionKind k) { return std::count_if(a.actions.begin(), a.actions.end(), [&](auto& x) { return x.kind == k; }); };
  EXPECT_GE(count(ActionKind::pan), 1);
  EXPECT_GE(count(ActionKind::cursor), 4);
  EXPECT_GE(count(ActionKind::gesture), 1);
  EXPECT_GE(count(ActionKind::deictic), 1);
  EXPECT_EQ(a.actions.size(), 43u);
  EXPECT_GE(a.duration, 540.0);
}

TEST(Lesson, JsonRoundTrip) {
  const auto a = lecture::generate_matrix_lesson();
  EXPECT_EQ(lecture::script_from_json(lecture::script_to_json(a)), a);
}

TEST(Lesson, RejectsBadScripts) {
  using lecture::script_from_json;
  using lecture::ScriptParseError;
  EXPECT_THROW(script_from_json("{"), ScriptParseError);
  EXPECT_THROW(script_from_json(R"({"duration": 5, "actions": [{"t": 2, "action": "cursor", "at": [0,0,0]},
                                                               {"t": 1, "action": "cursor", "at": [0,0,0]}]})"),
               ScriptParseError);
  EXPECT_THROW(script_from_json(R"({"duration": 5, "actions": [{"t": 1, "action": "link", "from": 1, "to": 2}]})"),
               ScriptParseError);
  EXPECT_THROW(script_from_json(R"({"duration": 5, "actions": [{"t": 1, "action": "create", "id": 1, "kind": "matrix",
                                    "at": [0,0,0], "matrix": {"type": "shear", "args": []}}]})"),
               ScriptParseError);
  EXPECT_THROW(script_from_json(R"({"duration": 5, "actions": [{"t": 1, "action": "dance"}]})"), ScriptParseError);
  EXPECT_THROW(script_from_json(R"({"duration": 5, "actions": [{"t": 9, "action": "pan", "delta": [1,0,0]}]})"),
               ScriptParseError);
}

TEST(Lesson, SnapshotIndependentOfTimeScale) {
  const auto lesson = lecture::generate_matrix_lesson();
  const auto a = board::snapshot(replay_script(lesson, 20));
  EXPECT_EQ(a, board::snapshot(replay_script(lesson, 10)));
  EXPECT_EQ(a, board::snapshot(replay_script(lesson, 3)));
}

TEST(Lesson, ReplayMatchesGolden) {
  const auto snap = board::snapshot(replay_script(lecture::generate_matrix_lesson(), 20));
  if (std::getenv("MIRRORBOARD_UPDATE_GOLDEN")) {
    std::ofstream(kGolden) << snap;
    GTEST_SKIP() << "golden rewritten";
  }
  EXPECT_EQ(snap, read_file(kGolden));
}
