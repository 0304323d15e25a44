#include "mirrorboard/board.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace mirrorboard::board {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw BoardError(BoardErrc::malformed_command, what); }

bool finite(const Vec3f& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

Vec3 effective(const Mat4f& m, const Vec3f& p, const Vec3f& pan) {
  const double x = p[0], y = p[1], z = p[2];
  return {m[0] * x + m[4] * y + m[8] * z + m[12] + pan[0],
          m[1] * x + m[5] * y + m[9] * z + m[13] + pan[1],
          m[2] * x + m[6] * y + m[10] * z + m[14] + pan[2]};
}

Sketch& find_sketch(BoardState& s, std::uint32_t id) {
  auto it = s.graph.sketches.find(id);
  if (it == s.graph.sketches.end()) throw BoardError(BoardErrc::unknown_sketch, "unknown sketch " + std::to_string(id));
  return it->second;
}

void fmt(std::string& out, double v) {
  if (v == 0.0) v = 0.0;  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, " %.6g", v);
  out += buf;
}

void fmt(std::string& out, std::span<const float> vs) {
  for (float v : vs) fmt(out, v);
}

}  // namespace

const char* to_string(BoardErrc e) {
  switch (e) {
    case BoardErrc::unknown_sketch: return "UnknownSketch";
    case BoardErrc::dangling_link: return "DanglingLink";
    case BoardErrc::out_of_frame_command: return "OutOfFrameCommand";
    case BoardErrc::malformed_command: return "MalformedCommand";
    case BoardErrc::duplicate_sketch: return "DuplicateSketch";
  }
  return "Unknown";
}

const char* to_string(Op op) {
  switch (op) {
    case Op::begin_frame: return "BEGIN_FRAME";
    case Op::create_sketch: return "CREATE_SKETCH";
    case Op::stroke: return "STROKE";
    case Op::text: return "TEXT";
    case Op::set_transform: return "SET_TRANSFORM";
    case Op::link: return "LINK";
    case Op::set_value: return "SET_VALUE";
    case Op::cursor: return "CURSOR";
    case Op::pan: return "PAN";
    case Op::delete_sketch: return "DELETE_SKETCH";
    case Op::end_frame: return "END_FRAME";
  }
  return "?";
}

const char* to_string(ViewMode m) { return m == ViewMode::mr ? "MR" : "PROJECTED"; }

ViewMode view_mode_from_string(std::string_view s) {
  if (s == "MR") return ViewMode::mr;
  if (s == "PROJECTED") return ViewMode::projected;
  throw std::invalid_argument("unknown view mode '" + std::string(s) + "'");
}

void validate(const RenderCommand& c) {
  const bool board_global = c.op == Op::begin_frame || c.op == Op::end_frame || c.op == Op::link ||
                            c.op == Op::cursor || c.op == Op::pan;
  if (!board_global && c.sketch_id == 0) malformed(std::string(to_string(c.op)) + " needs a nonzero sketch id");
  switch (c.op) {
    case Op::begin_frame:
    case Op::end_frame:
    case Op::create_sketch:
    case Op::delete_sketch:
      if (!std::holds_alternative<std::monostate>(c.args)) malformed(std::string(to_string(c.op)) + " takes no arguments");
      return;
    case Op::stroke: {
      const auto* s = c.stroke_args();
      if (!s) malformed("STROKE without stroke arguments");
      if (s->points.size() < 2) malformed("STROKE needs at least 2 points");
      for (const auto& p : s->points)
        if (!finite(p)) malformed("STROKE point is not finite");
      for (float v : s->rgba)
        if (!std::isfinite(v)) malformed("STROKE color is not finite");
      if (!std::isfinite(s->width) || s->width < 0) malformed("STROKE width must be finite and >= 0");
      return;
    }
    case Op::text: {
      const auto* t = c.text_args();
      if (!t) malformed("TEXT without text arguments");
      if (!wire::is_valid_utf8(t->text)) malformed("TEXT is not valid UTF-8");
      if (!finite(t->anchor) || !std::isfinite(t->height)) malformed("TEXT anchor/height not finite");
      return;
    }
    case Op::set_transform: {
      const auto* m = c.matrix_args();
      if (!m) malformed("SET_TRANSFORM without a matrix");
      for (float v : *m)
        if (!std::isfinite(v)) malformed("SET_TRANSFORM matrix has a non-finite entry");
      return;
    }
    case Op::link:
      if (!c.link_args()) malformed("LINK without endpoints");
      return;
    case Op::set_value:
      if (!c.value_args() || !std::isfinite(*c.value_args())) malformed("SET_VALUE needs one finite float");
      return;
    case Op::cursor:
    case Op::pan:
      if (!c.vec_args() || !finite(*c.vec_args())) malformed(std::string(to_string(c.op)) + " needs a finite vec3");
      return;
  }
  malformed("unknown op");
}

void apply_content(BoardState& s, const RenderCommand& c) {
  validate(c);
  auto& sketches = s.graph.sketches;
  switch (c.op) {
    case Op::create_sketch:
      if (sketches.contains(c.sketch_id))
        throw BoardError(BoardErrc::duplicate_sketch, "sketch " + std::to_string(c.sketch_id) + " already exists");
      sketches.emplace(c.sketch_id, Sketch{});
      return;
    case Op::delete_sketch:
      find_sketch(s, c.sketch_id);
      sketches.erase(c.sketch_id);
      std::erase_if(s.graph.links, [&](const auto& l) { return l.first == c.sketch_id || l.second == c.sketch_id; });
      return;
    case Op::stroke: find_sketch(s, c.sketch_id).strokes.push_back(*c.stroke_args()); return;
    case Op::text: find_sketch(s, c.sketch_id).texts.push_back(*c.text_args()); return;
    case Op::set_transform: find_sketch(s, c.sketch_id).transform = *c.matrix_args(); return;
    case Op::set_value: find_sketch(s, c.sketch_id).value = *c.value_args(); return;
    case Op::link: {
      const auto [from, to] = *c.link_args();
      if (!sketches.contains(from) || !sketches.contains(to))
        throw BoardError(BoardErrc::dangling_link,
                         "link " + std::to_string(from) + "->" + std::to_string(to) + " references a missing sketch");
      s.graph.links.emplace(from, to);
      return;
    }
    case Op::cursor: s.cursor = *c.vec_args(); return;
    case Op::pan: {
      const auto& d = *c.vec_args();
      for (int i = 0; i < 3; ++i) s.pan[i] += d[i];
      return;
    }
    case Op::begin_frame:
    case Op::end_frame: malformed("frame markers are not content");
  }
}

void Board::apply(const RenderCommand& c) {
  switch (c.op) {
    case Op::begin_frame:
      validate(c);
      if (pending_) throw BoardError(BoardErrc::out_of_frame_command, "BEGIN_FRAME inside an open frame");
      pending_ = committed_;
      return;
    case Op::end_frame:
      validate(c);
      if (!pending_) throw BoardError(BoardErrc::out_of_frame_command, "END_FRAME without BEGIN_FRAME");
      committed_ = std::move(*pending_);
      pending_.reset();
      ++frames_;
      return;
    default:
      if (!pending_)
        throw BoardError(BoardErrc::out_of_frame_command, std::string(to_string(c.op)) + " outside BEGIN_FRAME/END_FRAME");
      apply_content(*pending_, c);
  }
}

std::vector<DrawItem> visible_content(const BoardState& s, const BoardPlane& board, ViewMode mode) {
  std::vector<DrawItem> out;
  auto keep = [&](DrawItem&& item) {
    if (mode == ViewMode::mr) {
      out.push_back(std::move(item));
      return;
    }
    for (const auto& p : item.points)
      if (board.contains_uv(p)) {
        out.push_back(std::move(item));
        return;
      }
  };
  for (const auto& [id, sk] : s.graph.sketches) {
    for (std::size_t i = 0; i < sk.strokes.size(); ++i) {
      DrawItem item{id, DrawItem::Kind::stroke, i, {}};
      for (const auto& p : sk.strokes[i].points) item.points.push_back(effective(sk.transform, p, s.pan));
      keep(std::move(item));
    }
    for (std::size_t i = 0; i < sk.texts.size(); ++i)
      keep(DrawItem{id, DrawItem::Kind::text, i, {effective(sk.transform, sk.texts[i].anchor, s.pan)}});
  }
  return out;
}

std::string snapshot(const BoardState& s) {
  std::string out = "mirrorboard-board 1\npan";
  fmt(out, s.pan);
  out += "\ncursor";
  if (s.cursor)
    fmt(out, *s.cursor);
  else
    out += " none";
  out += "\nsketches " + std::to_string(s.graph.sketches.size()) + "\n";
  for (const auto& [id, sk] : s.graph.sketches) {
    out += "sketch " + std::to_string(id) + "\n  transform";
    fmt(out, sk.transform);
    out += "\n  value";
    if (sk.value)
      fmt(out, *sk.value);
    else
      out += " none";
    out += "\n";
    for (const auto& st : sk.strokes) {
      out += "  stroke rgba";
      fmt(out, st.rgba);
      out += " width";
      fmt(out, st.width);
      out += " points " + std::to_string(st.points.size());
      for (const auto& p : st.points) fmt(out, p);
      out += "\n";
    }
    for (const auto& t : sk.texts) {
      out += "  text " + nlohmann::json(t.text).dump() + " anchor";
      fmt(out, t.anchor);
      out += " height";
      fmt(out, t.height);
      out += "\n";
    }
  }
  out += "links " + std::to_string(s.graph.links.size()) + "\n";
  for (const auto& [from, to] : s.graph.links) out += "link " + std::to_string(from) + " " + std::to_string(to) + "\n";
  return out;
}

}  // namespace mirrorboard::board
