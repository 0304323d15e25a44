#pragma once

// Binary flake codec and stream framing.
//
// Packet layout (all integers big-endian):
//
//   'M' 'B' | version u8 = 0x01 | body_len u32 | body | crc32(body) u32
//
// body: scope, label, origin (each u16 length + UTF-8 octets), class u8,
//       seq u32, tag u8, count u32, data.
//
// See docs/wire.md for the full layout.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mirrorboard::wire {

inline constexpr std::uint8_t kMagic0 = 0x4D;
inline constexpr std::uint8_t kMagic1 = 0x42;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 7;   // magic(2) + version(1) + body_len(4)
inline constexpr std::size_t kTrailerSize = 4;  // crc32
inline constexpr std::size_t kMaxStringSize = 65535;
// Upper bound on body_len accepted from a stream; anything larger is treated as desync.
inline constexpr std::uint32_t kMaxBodySize = 16u << 20;

enum class WireErrc {
  ok = 0,
  oversize_string,
  invalid_text,
  empty_field,
  bad_magic,
  unsupported_version,
  length_mismatch,
  crc_mismatch,
  malformed_payload,
};

const char* to_string(WireErrc e);

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

enum class DeliveryClass : std::uint8_t { state = 0x00, event = 0x01 };

enum class PayloadTag : std::uint8_t {
  vec3 = 0x01,
  vec4 = 0x02,
  bytes = 0x03,
  floats = 0x04,
  ints = 0x05,
  text = 0x06,
};

using Vec3f = std::array<float, 3>;
using Vec4f = std::array<float, 4>;
using Bytes = std::vector<std::uint8_t>;

/// Homogeneous typed array. Float elements compare by bit pattern so that
/// NaN payloads still satisfy decode(encode(f)) == f.
class Payload {
 public:
  using Storage = std::variant<std::vector<Vec3f>, std::vector<Vec4f>, Bytes,
                               std::vector<float>, std::vector<std::int32_t>, std::string>;

  Payload() : data_(Bytes{}) {}

  static Payload vec3(std::vector<Vec3f> v) { return Payload(Storage(std::move(v))); }
  static Payload vec4(std::vector<Vec4f> v) { return Payload(Storage(std::move(v))); }
  static Payload bytes(Bytes v) { return Payload(Storage(std::move(v))); }
  static Payload floats(std::vector<float> v) { return Payload(Storage(std::move(v))); }
  static Payload ints(std::vector<std::int32_t> v) { return Payload(Storage(std::move(v))); }
  static Payload text(std::string v) { return Payload(Storage(std::move(v))); }

  PayloadTag tag() const;
  /// Element count as carried on the wire (octets for BYTES/TEXT).
  std::uint32_t count() const;

  const std::vector<Vec3f>* as_vec3() const { return std::get_if<0>(&data_); }
  const std::vector<Vec4f>* as_vec4() const { return std::get_if<1>(&data_); }
  const Bytes* as_bytes() const { return std::get_if<2>(&data_); }
  const std::vector<float>* as_floats() const { return std::get_if<3>(&data_); }
  const std::vector<std::int32_t>* as_ints() const { return std::get_if<4>(&data_); }
  const std::string* as_text() const { return std::get_if<5>(&data_); }

  const Storage& storage() const { return data_; }

  bool operator==(const Payload& other) const;

 private:
  explicit Payload(Storage s) : data_(std::move(s)) {}
  Storage data_;
};

struct Flake {
  std::string scope;
  std::string label;
  std::string origin;
  DeliveryClass cls = DeliveryClass::state;
  std::uint32_t seq = 0;
  Payload payload;

  bool operator==(const Flake&) const = default;
};

bool is_valid_utf8(std::string_view s) noexcept;

/// Encodes one flake as a complete framed packet. Deterministic.
/// Throws WireError (oversize_string, invalid_text, empty_field).
Bytes encode_flake(const Flake& f);

/// Total decoder: never throws, never reads out of bounds. `bytes` must hold
/// exactly one packet. On failure `out` is left unspecified.
WireErrc try_decode_flake(std::span<const std::uint8_t> bytes, Flake& out) noexcept;

/// Throwing form of try_decode_flake.
Flake decode_flake(std::span<const std::uint8_t> bytes);

struct SplitResult {
  std::vector<Bytes> packets;
  std::size_t consumed = 0;  // remainder is bytes[consumed..]
};

/// Cuts a byte stream into complete packets. Only the framing header is
/// inspected; packet contents are validated by decode_flake.
/// Throws WireError(bad_magic) on desync, WireError(length_mismatch) when a
/// header announces a body larger than kMaxBodySize.
SplitResult split_stream(std::span<const std::uint8_t> buffer);

/// Incremental wrapper over split_stream for socket readers.
class StreamDecoder {
 public:
  /// Appends received bytes and returns every packet completed by them.
  std::vector<Bytes> feed(std::span<const std::uint8_t> chunk);
  std::size_t buffered() const { return buffer_.size(); }

 private:
  Bytes buffer_;
};

}  // namespace mirrorboard::wire
