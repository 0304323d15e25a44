#include "mirrorboard/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mirrorboard::behavior {

using board::RenderCommand;
using board::Stroke;
using board::Text;
using board::Vec3f;

namespace {

constexpr std::size_t kPlotHistory = 600;
constexpr double kCubeScale = 0.25;

Vec3f f3(double x, double y, double z = 0.0) {
  return {static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)};
}

Stroke polyline(std::initializer_list<Vec3f> pts, board::Rgba color = {1, 1, 1, 1}) {
  return Stroke{color, 0.01f, std::vector<Vec3f>(pts)};
}

std::string matrix_row(const Mat4& m, int r) {
  std::string row;
  for (int c = 0; c < 4; ++c) {
    double v = std::round(m(r, c) * 1000.0) / 1000.0;
    if (v == 0.0) v = 0.0;
    char buf[24];
    std::snprintf(buf, sizeof buf, c ? " %g" : "%g", v);
    row += buf;
  }
  return row;
}

// Local-space geometry per sketch kind.
void emit_geometry(SketchId id, const SimSketch& s, std::vector<RenderCommand>& out) {
  switch (s.kind) {
    case SketchKind::pendulum:
      out.push_back(RenderCommand::stroke(id, polyline({f3(0, 0), f3(0, -0.4)})));
      out.push_back(RenderCommand::stroke(
          id, polyline({f3(-0.04, -0.36), f3(0.04, -0.36), f3(0.04, -0.44), f3(-0.04, -0.44), f3(-0.04, -0.36)},
                       {1, 0.8f, 0.2f, 1})));
      break;
    case SketchKind::plot:
      out.push_back(RenderCommand::stroke(id, polyline({f3(0, 0.2), f3(0, -0.2)})));
      out.push_back(RenderCommand::stroke(id, polyline({f3(0, 0), f3(0.6, 0)})));
      out.push_back(RenderCommand::text(id, Text{"theta", f3(0, 0.25), 0.06f}));
      break;
    case SketchKind::matrix:
      out.push_back(RenderCommand::stroke(id, polyline({f3(-0.27, 0.22), f3(-0.3, 0.22), f3(-0.3, -0.22), f3(-0.27, -0.22)})));
      out.push_back(RenderCommand::stroke(id, polyline({f3(0.27, 0.22), f3(0.3, 0.22), f3(0.3, -0.22), f3(0.27, -0.22)})));
      for (int r = 0; r < 4; ++r)
        out.push_back(RenderCommand::text(id, Text{matrix_row(s.matrix, r), f3(-0.25, 0.15 - 0.1 * r), 0.07f}));
      break;
    case SketchKind::cube: {
      const board::Rgba c{0.3f, 0.8f, 1, 1};
      for (double z : {-1.0, 1.0})
        out.push_back(RenderCommand::stroke(
            id, polyline({f3(-1, -1, z), f3(1, -1, z), f3(1, 1, z), f3(-1, 1, z), f3(-1, -1, z)}, c)));
      for (double x : {-1.0, 1.0})
        for (double y : {-1.0, 1.0}) out.push_back(RenderCommand::stroke(id, polyline({f3(x, y, -1), f3(x, y, 1)}, c)));
      break;
    }
    case SketchKind::freehand: break;
  }
}

}  // namespace

double pendulum_value(double theta0, double omega, double t) { return theta0 * std::cos(omega * t); }

std::map<SketchId, std::vector<LinkValue>> propagate_links(const std::vector<Link>& links,
                                                           const std::map<SketchId, LinkValue>& outputs) {
  std::map<SketchId, std::vector<LinkValue>> inputs;
  for (const auto& [from, to] : links) {
    auto it = outputs.find(from);
    if (it != outputs.end()) inputs[to].push_back(it->second);
  }
  return inputs;
}

const char* to_string(SketchKind k) {
  switch (k) {
    case SketchKind::pendulum: return "pendulum";
    case SketchKind::plot: return "plot";
    case SketchKind::matrix: return "matrix";
    case SketchKind::cube: return "cube";
    case SketchKind::freehand: return "freehand";
  }
  return "?";
}

SketchKind sketch_kind_from_string(std::string_view s) {
  for (auto k : {SketchKind::pendulum, SketchKind::plot, SketchKind::matrix, SketchKind::cube, SketchKind::freehand})
    if (s == to_string(k)) return k;
  throw lecture::ScriptParseError("unknown sketch kind '" + std::string(s) + "'");
}

std::optional<LinkValue> SimSketch::output(double t) const {
  switch (kind) {
    case SketchKind::pendulum: return pendulum_value(theta0, omega, t - t0);
    case SketchKind::plot:
      if (samples.empty()) return std::nullopt;
      return samples.back();
    case SketchKind::matrix: return matrix;
    default: return std::nullopt;
  }
}

BehaviorEngine::BehaviorEngine(lecture::LectureScript script) : script_(std::move(script)) {}

Mat4 BehaviorEngine::transform_of(SketchId, const SimSketch& s, double t) const {
  const Mat4 place = mat_translation(s.at.x, s.at.y, s.at.z);
  switch (s.kind) {
    case SketchKind::pendulum: return mat_mul(place, mat_rotation_z(pendulum_value(s.theta0, s.omega, t - s.t0)));
    case SketchKind::cube: return mat_mul(mat_mul(place, mat_scale(kCubeScale)), s.matrix);
    default: return place;
  }
}

void BehaviorEngine::create(SketchId id, SimSketch s, std::vector<RenderCommand>& out) {
  out.push_back(RenderCommand::create_sketch(id));
  emit_geometry(id, s, out);
  sketches_[id] = std::move(s);
}

void BehaviorEngine::remove(SketchId id, std::vector<RenderCommand>& out) {
  if (!sketches_.erase(id)) return;
  std::erase_if(links_, [&](const Link& l) { return l.first == id || l.second == id; });
  sent_transform_.erase(id);
  out.push_back(RenderCommand::delete_sketch(id));
}

void BehaviorEngine::run_action(const lecture::Action& a, double t, std::vector<RenderCommand>& out) {
  using lecture::ActionKind;
  switch (a.kind) {
    case ActionKind::create: {
      SimSketch s;
      s.kind = sketch_kind_from_string(a.sketch_kind);
      s.at = a.at;
      s.theta0 = a.theta0;
      s.omega = a.omega;
      s.t0 = t;
      if (s.kind == SketchKind::matrix) s.matrix = lecture::make_matrix(a.matrix);
      create(a.id, std::move(s), out);
      break;
    }
    case ActionKind::move:
      if (auto it = sketches_.find(a.id); it != sketches_.end()) it->second.at = a.at;
      break;
    case ActionKind::link:
      if (sketches_.contains(a.from) && sketches_.contains(a.to) &&
          std::find(links_.begin(), links_.end(), Link{a.from, a.to}) == links_.end()) {
        links_.emplace_back(a.from, a.to);
        out.push_back(RenderCommand::link(a.from, a.to));
      }
      break;
    case ActionKind::remove: remove(a.id, out); break;
    case ActionKind::cursor: out.push_back(RenderCommand::cursor(f3(a.at.x, a.at.y, a.at.z))); break;
    case ActionKind::pan: out.push_back(RenderCommand::pan(f3(a.delta.x, a.delta.y, a.delta.z))); break;
    case ActionKind::gesture:
    case ActionKind::deictic: break;  // annotations only; nothing is drawn
  }
}

void BehaviorEngine::input(const std::string&, const RenderCommand& c) { pending_input_.push_back(c); }

void BehaviorEngine::handle_input(const RenderCommand& c, double t, std::vector<RenderCommand>& out) {
  try {
    // Input strokes arrive without an id; the engine assigns one below.
    auto probe = c;
    if (probe.op == board::Op::stroke) probe.sketch_id = kFirstUserSketchId;
    board::validate(probe);
  } catch (const board::BoardError&) {
    ++stats_.inputs_rejected;
    return;
  }
  switch (c.op) {
    case board::Op::stroke: {
      const auto& st = *c.stroke_args();
      const SketchId id = next_user_id_++;
      out.push_back(RenderCommand::create_sketch(id));
      out.push_back(RenderCommand::stroke(id, st));
      SimSketch s;
      s.kind = SketchKind::freehand;
      sketches_[id] = std::move(s);
      sent_transform_[id] = Mat4::identity();

      const Vec3 first{st.points.front()[0], st.points.front()[1], st.points.front()[2]};
      for (auto& [pid, p] : sketches_) {
        if (p.kind != SketchKind::pendulum || length(first - p.at) > kExciteRadius) continue;
        const double extent = double(st.points.back()[0]) - double(st.points.front()[0]);
        p.theta0 = std::clamp(kExciteGain * extent, -kExciteClamp, kExciteClamp);
        p.t0 = t;
        break;
      }
      break;
    }
    case board::Op::cursor:
    case board::Op::pan: out.push_back(c); break;
    default: ++stats_.inputs_rejected;
  }
}

std::vector<RenderCommand> BehaviorEngine::step(double t) {
  if (t < last_t_) throw std::invalid_argument("behavior time went backwards");
  last_t_ = t;
  std::vector<RenderCommand> out{RenderCommand::begin_frame()};

  while (next_action_ < script_.actions.size() && script_.actions[next_action_].t <= t)
    run_action(script_.actions[next_action_++], t, out);
  for (const auto& c : std::exchange(pending_input_, {})) handle_input(c, t, out);

  std::map<SketchId, LinkValue> outputs;
  for (const auto& [id, s] : sketches_)
    if (auto o = s.output(t)) outputs.emplace(id, *o);
  const auto inputs = propagate_links(links_, outputs);

  for (auto& [id, s] : sketches_) {
    auto in = inputs.find(id);
    if (s.kind == SketchKind::plot && in != inputs.end()) {
      bool got = false;
      for (const auto& v : in->second)
        if (const auto* d = std::get_if<double>(&v)) {
          s.samples.push_back(*d);
          got = true;
        }
      if (s.samples.size() > kPlotHistory) s.samples.erase(s.samples.begin(), s.samples.end() - kPlotHistory);
      if (got) out.push_back(RenderCommand::set_value(id, static_cast<float>(s.samples.back())));
    } else if (s.kind == SketchKind::cube) {
      Mat4 product = Mat4::identity();
      if (in != inputs.end())
        for (const auto& v : in->second)
          if (const auto* m = std::get_if<Mat4>(&v)) product = mat_mul(product, *m);
      s.matrix = product;
    }
  }

  for (const auto& [id, s] : sketches_) {
    const Mat4 m = transform_of(id, s, t);
    auto sent = sent_transform_.find(id);
    if (sent == sent_transform_.end() || sent->second != m) {
      out.push_back(RenderCommand::set_transform(id, to_float(m)));
      sent_transform_[id] = m;
    }
    if (s.kind == SketchKind::pendulum)
      out.push_back(RenderCommand::set_value(id, static_cast<float>(pendulum_value(s.theta0, s.omega, t - s.t0))));
  }

  out.push_back(RenderCommand::end_frame());
  ++stats_.frames;
  stats_.commands += out.size();
  return out;
}

std::vector<double> frame_times(double duration, double time_scale, double tick_hz) {
  if (!(time_scale > 0) || !(tick_hz > 0) || !(duration >= 0)) throw std::invalid_argument("frame_times: bad arguments");
  std::vector<double> ts;
  for (std::uint64_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * time_scale / tick_hz;
    if (t >= duration) {
      ts.push_back(duration);
      return ts;
    }
    ts.push_back(t);
  }
}

board::BoardState replay_script(const lecture::LectureScript& script, double time_scale, double tick_hz) {
  BehaviorEngine engine(script);
  board::Board b;
  for (double t : frame_times(script.duration, time_scale, tick_hz))
    for (const auto& c : engine.step(t)) b.apply(c);
  return b.committed();
}

}  // namespace mirrorboard::behavior
