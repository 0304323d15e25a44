#include "mirrorboard/board.hpp"

#include "byte_io.hpp"

namespace mirrorboard::board {

namespace {

using detail::Reader;
using detail::Writer;

[[noreturn]] void malformed(const std::string& what) {
  throw BoardError(BoardErrc::malformed_command, "render command: " + what);
}

void put(Writer& w, const Vec3f& v) {
  for (float f : v) w.f32(f);
}

void get(Reader& r, float& v) {
  if (!r.f32(v)) malformed("truncated");
}

void get(Reader& r, std::uint32_t& v) {
  if (!r.u32(v)) malformed("truncated");
}

template <std::size_t N>
void get(Reader& r, std::array<float, N>& v) {
  for (float& f : v) get(r, f);
}

}  // namespace

wire::Bytes encode_command(const RenderCommand& c) {
  validate(c);
  wire::Bytes out;
  Writer w(out);
  w.u8(static_cast<std::uint8_t>(c.op));
  w.u32(c.sketch_id);
  switch (c.op) {
    case Op::stroke: {
      const auto& s = *c.stroke_args();
      for (float f : s.rgba) w.f32(f);
      w.f32(s.width);
      w.u32(static_cast<std::uint32_t>(s.points.size()));
      for (const auto& p : s.points) put(w, p);
      break;
    }
    case Op::text: {
      const auto& t = *c.text_args();
      w.u32(static_cast<std::uint32_t>(t.text.size()));
      w.raw(t.text.data(), t.text.size());
      put(w, t.anchor);
      w.f32(t.height);
      break;
    }
    case Op::set_transform:
      for (float f : *c.matrix_args()) w.f32(f);
      break;
    case Op::link:
      w.u32(c.link_args()->from);
      w.u32(c.link_args()->to);
      break;
    case Op::set_value: w.f32(*c.value_args()); break;
    case Op::cursor:
    case Op::pan: put(w, *c.vec_args()); break;
    default: break;
  }
  return out;
}

RenderCommand decode_command(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::uint8_t op = 0;
  if (!r.u8(op)) malformed("empty");
  if (op > static_cast<std::uint8_t>(Op::end_frame)) malformed("unknown op " + std::to_string(op));
  RenderCommand c;
  c.op = static_cast<Op>(op);
  get(r, c.sketch_id);
  switch (c.op) {
    case Op::stroke: {
      Stroke s;
      get(r, s.rgba);
      get(r, s.width);
      std::uint32_t n = 0;
      get(r, n);
      if (r.remaining() / 12 < n) malformed("stroke point count exceeds data");
      s.points.resize(n);
      for (auto& p : s.points) get(r, p);
      c.args = std::move(s);
      break;
    }
    case Op::text: {
      Text t;
      std::uint32_t n = 0;
      get(r, n);
      std::span<const std::uint8_t> raw;
      if (!r.octets(n, raw)) malformed("text length exceeds data");
      t.text.assign(raw.begin(), raw.end());
      get(r, t.anchor);
      get(r, t.height);
      c.args = std::move(t);
      break;
    }
    case Op::set_transform: {
      Mat4f m{};
      get(r, m);
      c.args = m;
      break;
    }
    case Op::link: {
      LinkArgs l;
      get(r, l.from);
      get(r, l.to);
      c.args = l;
      break;
    }
    case Op::set_value: {
      float v = 0;
      get(r, v);
      c.args = v;
      break;
    }
    case Op::cursor:
    case Op::pan: {
      Vec3f v{};
      get(r, v);
      c.args = v;
      break;
    }
    default: break;
  }
  if (r.remaining() != 0) malformed(std::to_string(r.remaining()) + " trailing bytes");
  validate(c);
  return c;
}

}  // namespace mirrorboard::board
