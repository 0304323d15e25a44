#include "mirrorboard/lecture.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"

namespace mirrorboard::lecture {

using nlohmann::json;

namespace {

constexpr std::uint32_t kMaxScriptSketchId = 999;  // user strokes get ids from 1000

constexpr std::array<std::pair<ActionKind, const char*>, 8> kActionNames = {{
    {ActionKind::create, "create"},
    {ActionKind::move, "move"},
    {ActionKind::link, "link"},
    {ActionKind::remove, "delete"},
    {ActionKind::cursor, "cursor"},
    {ActionKind::pan, "pan"},
    {ActionKind::gesture, "gesture"},
    {ActionKind::deictic, "deictic"},
}};

ActionKind action_from_string(const std::string& s) {
  for (const auto& [k, name] : kActionNames)
    if (s == name) return k;
  throw ScriptParseError("unknown action '" + s + "'");
}

const std::set<std::string>& sketch_kinds() {
  static const std::set<std::string> k = {"pendulum", "plot", "matrix", "cube"};
  return k;
}

Action action_from_json(const json& j) {
  Action a;
  a.t = j.at("t").get<double>();
  a.kind = action_from_string(j.at("action").get<std::string>());
  switch (a.kind) {
    case ActionKind::create:
      a.id = j.at("id").get<std::uint32_t>();
      a.sketch_kind = j.at("kind").get<std::string>();
      a.at = detail::vec3_from_json(j.at("at"));
      if (a.sketch_kind == "pendulum") {
        a.theta0 = j.at("theta0").get<double>();
        a.omega = j.at("omega").get<double>();
      }
      if (a.sketch_kind == "matrix") {
        a.matrix.type = j.at("matrix").at("type").get<std::string>();
        a.matrix.args = j.at("matrix").value("args", std::vector<double>{});
      }
      break;
    case ActionKind::move:
      a.id = j.at("id").get<std::uint32_t>();
      a.at = detail::vec3_from_json(j.at("at"));
      break;
    case ActionKind::link:
      a.from = j.at("from").get<std::uint32_t>();
      a.to = j.at("to").get<std::uint32_t>();
      break;
    case ActionKind::remove: a.id = j.at("id").get<std::uint32_t>(); break;
    case ActionKind::cursor: a.at = detail::vec3_from_json(j.at("at")); break;
    case ActionKind::pan: a.delta = detail::vec3_from_json(j.at("delta")); break;
    case ActionKind::gesture:
      a.target = j.at("target").get<std::string>();
      a.duration = j.value("duration", 0.0);
      break;
    case ActionKind::deictic:
      a.target = j.value("target", std::string{});
      a.text = j.at("text").get<std::string>();
      break;
  }
  return a;
}

json action_to_json(const Action& a) {
  json j = {{"t", a.t}, {"action", to_string(a.kind)}};
  switch (a.kind) {
    case ActionKind::create:
      j["id"] = a.id;
      j["kind"] = a.sketch_kind;
      j["at"] = detail::to_json(a.at);
      if (a.sketch_kind == "pendulum") {
        j["theta0"] = a.theta0;
        j["omega"] = a.omega;
      }
      if (a.sketch_kind == "matrix") j["matrix"] = {{"type", a.matrix.type}, {"args", a.matrix.args}};
      break;
    case ActionKind::move:
      j["id"] = a.id;
      j["at"] = detail::to_json(a.at);
      break;
    case ActionKind::link:
      j["from"] = a.from;
      j["to"] = a.to;
      break;
    case ActionKind::remove: j["id"] = a.id; break;
    case ActionKind::cursor: j["at"] = detail::to_json(a.at); break;
    case ActionKind::pan: j["delta"] = detail::to_json(a.delta); break;
    case ActionKind::gesture:
      j["target"] = a.target;
      j["duration"] = a.duration;
      break;
    case ActionKind::deictic:
      j["target"] = a.target;
      j["text"] = a.text;
      break;
  }
  return j;
}

// Replays sketch liveness so a script cannot reference ids that do not exist.
void validate(const LectureScript& s) {
  if (!std::isfinite(s.duration) || s.duration < 0) throw ScriptParseError("duration must be finite and >= 0");
  std::set<std::uint32_t> live;
  double prev = 0.0;
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    const auto& a = s.actions[i];
    const std::string where = "action " + std::to_string(i) + ": ";
    if (!std::isfinite(a.t) || a.t < prev) throw ScriptParseError(where + "timestamps must be nondecreasing");
    if (a.t > s.duration) throw ScriptParseError(where + "timestamp after script duration");
    prev = a.t;
    auto require_live = [&](std::uint32_t id) {
      if (!live.contains(id)) throw ScriptParseError(where + "sketch " + std::to_string(id) + " does not exist");
    };
    switch (a.kind) {
      case ActionKind::create:
        if (a.id == 0 || a.id > kMaxScriptSketchId)
          throw ScriptParseError(where + "sketch id must be in 1.." + std::to_string(kMaxScriptSketchId));
        if (!live.insert(a.id).second) throw ScriptParseError(where + "sketch " + std::to_string(a.id) + " already exists");
        if (!sketch_kinds().contains(a.sketch_kind)) throw ScriptParseError(where + "unknown kind '" + a.sketch_kind + "'");
        if (a.sketch_kind == "pendulum" && !(a.omega > 0)) throw ScriptParseError(where + "pendulum omega must be > 0");
        if (a.sketch_kind == "matrix") make_matrix(a.matrix);
        break;
      case ActionKind::move: require_live(a.id); break;
      case ActionKind::link:
        require_live(a.from);
        require_live(a.to);
        break;
      case ActionKind::remove:
        require_live(a.id);
        live.erase(a.id);
        break;
      default: break;
    }
  }
}

}  // namespace

const char* to_string(ActionKind k) {
  for (const auto& [kind, name] : kActionNames)
    if (kind == k) return name;
  return "?";
}

Mat4 make_matrix(const MatrixSpec& spec) {
  auto need = [&](std::size_t n) {
    if (spec.args.size() != n)
      throw ScriptParseError("matrix '" + spec.type + "' takes " + std::to_string(n) + " argument(s)");
  };
  try {
    if (spec.type == "identity") return need(0), Mat4::identity();
    if (spec.type == "translation") return need(3), mat_translation(spec.args[0], spec.args[1], spec.args[2]);
    if (spec.type == "rotation_x") return need(1), mat_rotation_x(spec.args[0]);
    if (spec.type == "rotation_y") return need(1), mat_rotation_y(spec.args[0]);
    if (spec.type == "rotation_z") return need(1), mat_rotation_z(spec.args[0]);
    if (spec.type == "scale") return need(1), mat_scale(spec.args[0]);
  } catch (const NonFiniteInput& e) {
    throw ScriptParseError(e.what());
  }
  throw ScriptParseError("unknown matrix type '" + spec.type + "'");
}

LectureScript script_from_json(std::string_view text) {
  LectureScript s;
  try {
    const auto j = json::parse(text);
    s.name = j.value("name", std::string{});
    s.duration = j.at("duration").get<double>();
    for (const auto& a : j.at("actions")) s.actions.push_back(action_from_json(a));
  } catch (const json::exception& e) {
    throw ScriptParseError(std::string("lecture script: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScriptParseError(std::string("lecture script: ") + e.what());
  }
  validate(s);
  return s;
}

std::string script_to_json(const LectureScript& s) {
  json j = {{"name", s.name}, {"duration", s.duration}, {"actions", json::array()}};
  for (const auto& a : s.actions) j["actions"].push_back(action_to_json(a));
  return j.dump(1);
}

LectureScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScriptParseError("cannot open lecture script '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return script_from_json(ss.str());
}

LectureScript generate_matrix_lesson() {
  LectureScript s;
  s.name = "matrix-lesson";
  s.duration = 600.0;
  auto add = [&](double t, ActionKind k) -> Action& {
    Action a;
    a.t = t;
    a.kind = k;
    return s.actions.emplace_back(std::move(a));
  };
  auto create = [&](double t, std::uint32_t id, const char* kind, Vec3 at) -> Action& {
    Action& a = add(t, ActionKind::create);
    a.id = id;
    a.sketch_kind = kind;
    a.at = at;
    return a;
  };
  auto matrix = [&](double t, std::uint32_t id, Vec3 at, MatrixSpec spec) { create(t, id, "matrix", at).matrix = spec; };
  auto link = [&](double t, std::uint32_t from, std::uint32_t to) {
    Action& a = add(t, ActionKind::link);
    a.from = from;
    a.to = to;
  };
  auto cursor = [&](double t, Vec3 at) { add(t, ActionKind::cursor).at = at; };
  auto gesture = [&](double t, const char* target, double dur) {
    Action& a = add(t, ActionKind::gesture);
    a.target = target;
    a.duration = dur;
  };
  auto deictic = [&](double t, const char* target, const char* text) {
    Action& a = add(t, ActionKind::deictic);
    a.target = target;
    a.text = text;
  };
  auto remove = [&](double t, std::uint32_t id) { add(t, ActionKind::remove).id = id; };
  const MatrixSpec translate{"translation", {1.0, 0.0, 0.0}};
  const MatrixSpec rotate{"rotation_z", {std::numbers::pi / 2}};

  // Warm-up: the pendulum drives a plot through a link.
  Action& p = create(0, 10, "pendulum", {-1.2, 0.5, 0});
  p.theta0 = 0.5;
  p.omega = 2.0;
  create(2, 11, "plot", {-0.4, 0.5, 0});
  link(5, 10, 11);
  cursor(8, {-1.2, 0.3, 0});
  deictic(15, "10", "this pendulum swings");
  gesture(20, "11", 3);
  cursor(40, {-0.4, 0.5, 0});
  deictic(45, "11", "and the plot follows it");
  remove(60, 10);
  remove(60, 11);

  // Part 1: a cube, a translation and a rotation applied through links.
  create(70, 1, "cube", {-1.0, -0.3, 0});
  cursor(75, {-1.0, -0.3, 0});
  deictic(80, "1", "here is a cube");
  matrix(90, 2, {0.2, 0.6, 0}, translate);
  cursor(100, {0.2, 0.6, 0});
  gesture(100, "2", 4);
  deictic(105, "2", "a translation matrix");
  link(120, 2, 1);
  deictic(130, "1", "it moved one unit right");
  matrix(150, 3, {1.2, 0.6, 0}, rotate);
  cursor(160, {1.2, 0.6, 0});
  deictic(165, "3", "a rotation about z");
  link(180, 3, 1);
  gesture(200, "1", 5);
  deictic(200, "1", "rotate first, then translate");
  cursor(240, {-0.5, -0.3, 0});
  deictic(280, "board", "let's make some room");
  add(300, ActionKind::pan).delta = {-3.0, 0.0, 0.0};

  // Part 2: the same two matrices in both orders, side by side.
  create(310, 4, "cube", {2.0, -0.3, 0});
  create(320, 5, "cube", {4.0, -0.3, 0});
  matrix(330, 6, {2.5, 0.6, 0}, translate);
  matrix(340, 7, {3.5, 0.6, 0}, rotate);
  link(360, 6, 4);
  link(380, 7, 4);
  link(400, 7, 5);
  link(420, 6, 5);
  cursor(440, {2.0, -0.3, 0});
  deictic(460, "4", "T times R");
  cursor(480, {4.0, -0.3, 0});
  deictic(500, "5", "R times T");
  gesture(520, "5", 5);
  cursor(560, {3.0, 0.2, 0});
  deictic(590, "board", "matrix multiplication is not commutative");
  return s;
}

}  // namespace mirrorboard::lecture
