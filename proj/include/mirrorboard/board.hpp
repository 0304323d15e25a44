#pragma once

// The shared MR board: render-command ingestion, the sketch/link graph, pan,
// and the projected-viewport vs infinite-board views.
//
// Geometry is stored in 32-bit floats, exactly as it travels on the wire, so
// a board fed directly and a board fed through the relay hold identical state.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mirrorboard/board_plane.hpp"
#include "mirrorboard/vec3.hpp"
#include "mirrorboard/wire.hpp"

namespace mirrorboard::board {

using wire::Vec3f;
using Mat4f = std::array<float, 16>;  // column-major
using Rgba = std::array<float, 4>;

inline constexpr Mat4f kIdentity = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

enum class BoardErrc {
  unknown_sketch,
  dangling_link,
  out_of_frame_command,
  malformed_command,
  duplicate_sketch,
};

const char* to_string(BoardErrc e);

class BoardError : public std::runtime_error {
 public:
  BoardError(BoardErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  BoardErrc code() const noexcept { return code_; }

 private:
  BoardErrc code_;
};

enum class Op : std::uint8_t {
  begin_frame = 0,
  create_sketch = 1,
  stroke = 2,
  text = 3,
  set_transform = 4,
  link = 5,
  set_value = 6,
  cursor = 7,
  pan = 8,
  delete_sketch = 9,
  end_frame = 10,
};

const char* to_string(Op op);

struct Stroke {
  Rgba rgba{1, 1, 1, 1};
  float width = 0.01f;
  std::vector<Vec3f> points;

  bool operator==(const Stroke&) const = default;
};

struct Text {
  std::string text;
  Vec3f anchor{};
  float height = 0.1f;

  bool operator==(const Text&) const = default;
};

struct LinkArgs {
  std::uint32_t from = 0;
  std::uint32_t to = 0;

  bool operator==(const LinkArgs&) const = default;
};

/// One draw instruction. `sketch_id` 0 addresses the board itself (frame
/// markers, CURSOR, PAN, LINK).
struct RenderCommand {
  using Args = std::variant<std::monostate, Stroke, Text, Mat4f, LinkArgs, float, Vec3f>;

  Op op = Op::begin_frame;
  std::uint32_t sketch_id = 0;
  Args args;

  static RenderCommand begin_frame() { return {Op::begin_frame, 0, {}}; }
  static RenderCommand end_frame() { return {Op::end_frame, 0, {}}; }
  static RenderCommand create_sketch(std::uint32_t id) { return {Op::create_sketch, id, {}}; }
  static RenderCommand delete_sketch(std::uint32_t id) { return {Op::delete_sketch, id, {}}; }
  static RenderCommand stroke(std::uint32_t id, Stroke s) { return {Op::stroke, id, std::move(s)}; }
  static RenderCommand text(std::uint32_t id, Text t) { return {Op::text, id, std::move(t)}; }
  static RenderCommand set_transform(std::uint32_t id, const Mat4f& m) { return {Op::set_transform, id, m}; }
  static RenderCommand link(std::uint32_t from, std::uint32_t to) { return {Op::link, 0, LinkArgs{from, to}}; }
  static RenderCommand set_value(std::uint32_t id, float v) { return {Op::set_value, id, v}; }
  static RenderCommand cursor(const Vec3f& p) { return {Op::cursor, 0, p}; }
  static RenderCommand pan(const Vec3f& delta) { return {Op::pan, 0, delta}; }

  /// Argument accessors; nullptr if the variant holds something else.
  const Stroke* stroke_args() const { return std::get_if<Stroke>(&args); }
  const Text* text_args() const { return std::get_if<Text>(&args); }
  const Mat4f* matrix_args() const { return std::get_if<Mat4f>(&args); }
  const LinkArgs* link_args() const { return std::get_if<LinkArgs>(&args); }
  const float* value_args() const { return std::get_if<float>(&args); }
  const Vec3f* vec_args() const { return std::get_if<Vec3f>(&args); }

  bool operator==(const RenderCommand&) const = default;
};

/// Throws BoardError(malformed_command) unless the args match the op and
/// satisfy its invariants (>= 2 finite stroke points, finite matrix, ...).
void validate(const RenderCommand& c);

struct Sketch {
  std::vector<Stroke> strokes;
  std::vector<Text> texts;
  Mat4f transform = kIdentity;
  std::optional<float> value;

  bool operator==(const Sketch&) const = default;
};

struct SketchGraph {
  std::map<std::uint32_t, Sketch> sketches;
  std::set<std::pair<std::uint32_t, std::uint32_t>> links;

  bool operator==(const SketchGraph&) const = default;
};

struct BoardState {
  SketchGraph graph;
  Vec3f pan{};
  std::optional<Vec3f> cursor;

  bool operator==(const BoardState&) const = default;
};

/// Applies one content command (anything but the frame markers) to `s`.
/// Validates first, so a throwing command leaves `s` untouched.
void apply_content(BoardState& s, const RenderCommand& c);

/// Frame-atomic board. Commands between BEGIN_FRAME and END_FRAME mutate a
/// pending copy; END_FRAME publishes it. Readers only ever see `committed()`.
class Board {
 public:
  /// Throws BoardError; OutOfFrameCommand for content outside a frame, for
  /// END_FRAME without BEGIN_FRAME, and for a nested BEGIN_FRAME. A rejected
  /// content command is skipped; the rest of the frame still applies.
  void apply(const RenderCommand& c);

  const BoardState& committed() const { return committed_; }
  bool in_frame() const { return pending_.has_value(); }
  std::uint64_t frames() const { return frames_; }

 private:
  BoardState committed_;
  std::optional<BoardState> pending_;
  std::uint64_t frames_ = 0;
};

enum class ViewMode { projected, mr };

const char* to_string(ViewMode m);
ViewMode view_mode_from_string(std::string_view s);

struct DrawItem {
  enum class Kind { stroke, text };

  std::uint32_t sketch_id = 0;
  Kind kind = Kind::stroke;
  std::size_t index = 0;     // position within the sketch's strokes or texts
  std::vector<Vec3> points;  // effective positions: transform * p + pan

  bool operator==(const DrawItem&) const = default;
};

/// MR returns every stroke and text item; PROJECTED keeps an item iff at least
/// one of its effective points lies inside the board extents rectangle.
std::vector<DrawItem> visible_content(const BoardState& s, const BoardPlane& board, ViewMode mode);

/// Canonical text form: sorted ids, %.6g floats, -0 written as 0.
std::string snapshot(const BoardState& s);

/// Binary render-command codec carried in BYTES payloads of `render` flakes.
/// Layout: op u8 | sketch_id u32 | op-specific body, big-endian; see docs/wire.md.
wire::Bytes encode_command(const RenderCommand& c);
/// Throws BoardError(malformed_command) on truncation, trailing bytes, unknown op.
RenderCommand decode_command(std::span<const std::uint8_t> bytes);

inline constexpr std::string_view kRenderLabel = "render";

}  // namespace mirrorboard::board
