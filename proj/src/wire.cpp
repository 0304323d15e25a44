#include "mirrorboard/wire.hpp"

#include <bit>
#include <cstring>

#include <boost/crc.hpp>

#include "byte_io.hpp"

namespace mirrorboard::wire {

namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

using detail::Reader;
using detail::Writer;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void check_string(const std::string& s, const char* field) {
  if (s.empty()) throw WireError(WireErrc::empty_field, std::string(field) + " must not be empty");
  if (s.size() > kMaxStringSize)
    throw WireError(WireErrc::oversize_string, std::string(field) + " exceeds 65535 bytes");
  if (!is_valid_utf8(s)) throw WireError(WireErrc::invalid_text, std::string(field) + " is not UTF-8");
}

template <typename Container>
bool same_bits(const Container& a, const Container& b) {
  using T = typename Container::value_type;
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

std::size_t element_size(PayloadTag tag) {
  switch (tag) {
    case PayloadTag::vec3: return 12;
    case PayloadTag::vec4: return 16;
    case PayloadTag::floats:
    case PayloadTag::ints: return 4;
    case PayloadTag::bytes:
    case PayloadTag::text: return 1;
  }
  return 0;
}

WireErrc decode_body(std::span<const std::uint8_t> body, Flake& out) {
  Reader r(body);
  if (!r.str(out.scope) || !r.str(out.label) || !r.str(out.origin)) return WireErrc::malformed_payload;
  for (const std::string* s : {&out.scope, &out.label, &out.origin}) {
    if (s->empty() || !is_valid_utf8(*s)) return WireErrc::malformed_payload;
  }
  std::uint8_t cls;
  std::uint8_t tag_byte;
  std::uint32_t count;
  if (!r.u8(cls) || !r.u32(out.seq) || !r.u8(tag_byte) || !r.u32(count)) return WireErrc::malformed_payload;
  if (cls > 0x01) return WireErrc::malformed_payload;
  out.cls = static_cast<DeliveryClass>(cls);
  if (tag_byte < 0x01 || tag_byte > 0x06) return WireErrc::malformed_payload;
  auto tag = static_cast<PayloadTag>(tag_byte);

  // Exact length check before any allocation sized by `count`.
  const std::uint64_t want = std::uint64_t{count} * element_size(tag);
  if (want != r.remaining()) return WireErrc::malformed_payload;

  switch (tag) {
    case PayloadTag::vec3: {
      std::vector<Vec3f> v(count);
      for (auto& e : v)
        for (auto& c : e) r.f32(c);
      out.payload = Payload::vec3(std::move(v));
      break;
    }
    case PayloadTag::vec4: {
      std::vector<Vec4f> v(count);
      for (auto& e : v)
        for (auto& c : e) r.f32(c);
      out.payload = Payload::vec4(std::move(v));
      break;
    }
    case PayloadTag::floats: {
      std::vector<float> v(count);
      for (auto& e : v) r.f32(e);
      out.payload = Payload::floats(std::move(v));
      break;
    }
    case PayloadTag::ints: {
      std::vector<std::int32_t> v(count);
      for (auto& e : v) {
        std::uint32_t u = 0;
        r.u32(u);
        e = static_cast<std::int32_t>(u);
      }
      out.payload = Payload::ints(std::move(v));
      break;
    }
    case PayloadTag::bytes: {
      std::span<const std::uint8_t> o;
      r.octets(count, o);
      out.payload = Payload::bytes(Bytes(o.begin(), o.end()));
      break;
    }
    case PayloadTag::text: {
      std::span<const std::uint8_t> o;
      r.octets(count, o);
      std::string s(reinterpret_cast<const char*>(o.data()), o.size());
      if (!is_valid_utf8(s)) return WireErrc::malformed_payload;
      out.payload = Payload::text(std::move(s));
      break;
    }
  }
  return WireErrc::ok;
}

}  // namespace

const char* to_string(WireErrc e) {
  switch (e) {
    case WireErrc::ok: return "Ok";
    case WireErrc::oversize_string: return "OversizeString";
    case WireErrc::invalid_text: return "InvalidText";
    case WireErrc::empty_field: return "EmptyField";
    case WireErrc::bad_magic: return "BadMagic";
    case WireErrc::unsupported_version: return "UnsupportedVersion";
    case WireErrc::length_mismatch: return "LengthMismatch";
    case WireErrc::crc_mismatch: return "CrcMismatch";
    case WireErrc::malformed_payload: return "MalformedPayload";
  }
  return "Unknown";
}

PayloadTag Payload::tag() const {
  return static_cast<PayloadTag>(data_.index() + 1);
}

std::uint32_t Payload::count() const {
  return std::visit([](const auto& v) { return static_cast<std::uint32_t>(v.size()); }, data_);
}

bool Payload::operator==(const Payload& other) const {
  if (data_.index() != other.data_.index()) return false;
  return std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        return same_bits(a, std::get<T>(other.data_));
      },
      data_);
}

bool is_valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (n - i <= extra) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range code points.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

Bytes encode_flake(const Flake& f) {
  check_string(f.scope, "scope");
  check_string(f.label, "label");
  check_string(f.origin, "origin");
  if (const auto* t = f.payload.as_text(); t && !is_valid_utf8(*t))
    throw WireError(WireErrc::invalid_text, "TEXT payload is not valid UTF-8");

  Bytes out;
  out.reserve(kHeaderSize + 32 + f.scope.size() + f.label.size() + f.origin.size());
  Writer w(out);
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(kVersion);
  w.u32(0);  // body_len, patched below

  w.str(f.scope);
  w.str(f.label);
  w.str(f.origin);
  w.u8(static_cast<std::uint8_t>(f.cls));
  w.u32(f.seq);
  w.u8(static_cast<std::uint8_t>(f.payload.tag()));
  w.u32(f.payload.count());
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::vector<Vec3f>> || std::is_same_v<T, std::vector<Vec4f>>) {
          for (const auto& e : v)
            for (float c : e) w.f32(c);
        } else if constexpr (std::is_same_v<T, std::vector<float>>) {
          for (float c : v) w.f32(c);
        } else if constexpr (std::is_same_v<T, std::vector<std::int32_t>>) {
          for (auto c : v) w.u32(static_cast<std::uint32_t>(c));
        } else {
          w.raw(v.data(), v.size());
        }
      },
      f.payload.storage());

  const std::size_t body_len = out.size() - kHeaderSize;
  if (body_len > kMaxBodySize) throw WireError(WireErrc::length_mismatch, "flake body exceeds 16 MiB");
  for (int k = 0; k < 4; ++k) out[3 + k] = static_cast<std::uint8_t>(body_len >> (24 - 8 * k));
  w.u32(crc32_of(std::span(out).subspan(kHeaderSize, body_len)));
  return out;
}

WireErrc try_decode_flake(std::span<const std::uint8_t> bytes, Flake& out) noexcept {
  try {
    if (!bytes.empty() && bytes[0] != kMagic0) return WireErrc::bad_magic;
    if (bytes.size() >= 2 && bytes[1] != kMagic1) return WireErrc::bad_magic;
    if (bytes.size() >= 3 && bytes[2] != kVersion) return WireErrc::unsupported_version;
    if (bytes.size() < kHeaderSize + kTrailerSize) return WireErrc::length_mismatch;
    const std::uint32_t body_len = read_be32(bytes.data() + 3);
    if (std::uint64_t{body_len} + kHeaderSize + kTrailerSize != bytes.size()) return WireErrc::length_mismatch;
    const auto body = bytes.subspan(kHeaderSize, body_len);
    if (crc32_of(body) != read_be32(bytes.data() + kHeaderSize + body_len)) return WireErrc::crc_mismatch;
    return decode_body(body, out);
  } catch (...) {
    // Only std::bad_alloc can reach here; body size is bounded by the input.
    return WireErrc::malformed_payload;
  }
}

Flake decode_flake(std::span<const std::uint8_t> bytes) {
  Flake f;
  if (auto e = try_decode_flake(bytes, f); e != WireErrc::ok)
    throw WireError(e, std::string("decode_flake: ") + to_string(e));
  return f;
}

SplitResult split_stream(std::span<const std::uint8_t> buffer) {
  SplitResult result;
  std::size_t pos = 0;
  while (buffer.size() - pos >= 2) {
    if (buffer[pos] != kMagic0 || buffer[pos + 1] != kMagic1)
      throw WireError(WireErrc::bad_magic, "stream desync: bad magic at offset " + std::to_string(pos));
    if (buffer.size() - pos < kHeaderSize) break;
    const std::uint32_t body_len = read_be32(buffer.data() + pos + 3);
    if (body_len > kMaxBodySize)
      throw WireError(WireErrc::length_mismatch, "announced body length exceeds limit");
    const std::size_t total = kHeaderSize + body_len + kTrailerSize;
    if (buffer.size() - pos < total) break;
    result.packets.emplace_back(buffer.begin() + pos, buffer.begin() + pos + total);
    pos += total;
  }
  if (buffer.size() - pos == 1 && buffer[pos] != kMagic0)
    throw WireError(WireErrc::bad_magic, "stream desync: bad magic at offset " + std::to_string(pos));
  result.consumed = pos;
  return result;
}

std::vector<Bytes> StreamDecoder::feed(std::span<const std::uint8_t> chunk) {
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
  auto split = split_stream(buffer_);
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(split.consumed));
  return std::move(split.packets);
}

}  // namespace mirrorboard::wire
