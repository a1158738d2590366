#include "hetbridge/coap/codec.hpp"

#include <algorithm>
#include <cstdio>

namespace hetbridge::coap {

namespace {

[[noreturn]] void fail(CodecError::Kind kind, const std::string& what) { throw CodecError(kind, what); }

constexpr std::uint8_t kPayloadMarker = 0xFF;

// Splits a delta or length into its 4-bit nibble and 0-2 extension bytes.
std::uint8_t nibble_for(std::uint32_t v) {
  if (v < 13) return static_cast<std::uint8_t>(v);
  if (v < 269) return 13;
  return 14;
}

void put_extension(Bytes& out, std::uint32_t v) {
  if (v < 13) return;
  if (v < 269) {
    out.push_back(static_cast<std::uint8_t>(v - 13));
    return;
  }
  const std::uint32_t ext = v - 269;
  out.push_back(static_cast<std::uint8_t>(ext >> 8));
  out.push_back(static_cast<std::uint8_t>(ext & 0xFF));
}

std::uint32_t read_extension(std::span<const std::uint8_t> bytes, std::size_t& pos, std::uint8_t nibble) {
  if (nibble < 13) return nibble;
  if (nibble == 15) fail(CodecError::Kind::malformed_option, "reserved option nibble 15");
  if (nibble == 13) {
    if (pos + 1 > bytes.size()) fail(CodecError::Kind::truncated, "option extension truncated");
    return 13u + bytes[pos++];
  }
  if (pos + 2 > bytes.size()) fail(CodecError::Kind::truncated, "option extension truncated");
  const std::uint32_t v = (static_cast<std::uint32_t>(bytes[pos]) << 8) | bytes[pos + 1];
  pos += 2;
  return 269u + v;
}

}  // namespace

std::string Code::to_string() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%u.%02u", cls(), detail());
  return buf;
}

Option Option::uint(std::uint16_t number, std::uint32_t v) {
  Option o{number, {}};
  // Minimal big-endian; zero is the empty string.
  while (v > 0) {
    o.value.insert(o.value.begin(), static_cast<char>(v & 0xFF));
    v >>= 8;
  }
  return o;
}

std::uint32_t Option::as_uint() const {
  std::uint32_t v = 0;
  for (unsigned char c : value) v = (v << 8) | c;
  return v;
}

std::string Message::uri_path() const {
  std::string path;
  for (const auto& o : options) {
    if (o.number != options::uri_path) continue;
    if (!path.empty()) path += '/';
    path += o.value;
  }
  return path;
}

std::vector<std::string> Message::uri_queries() const {
  std::vector<std::string> out;
  for (const auto& o : options) {
    if (o.number == options::uri_query) out.push_back(o.value);
  }
  return out;
}

std::optional<std::uint32_t> Message::content_format() const {
  for (const auto& o : options) {
    if (o.number == options::content_format) return o.as_uint();
  }
  return std::nullopt;
}

void Message::add_option(Option opt) {
  auto it = std::upper_bound(options.begin(), options.end(), opt.number,
                             [](std::uint16_t n, const Option& o) { return n < o.number; });
  options.insert(it, std::move(opt));
}

void Message::set_uri_path(std::string_view path) {
  std::erase_if(options, [](const Option& o) { return o.number == options::uri_path; });
  while (!path.empty()) {
    const auto pos = path.find('/');
    const std::string_view seg = path.substr(0, pos);
    if (!seg.empty()) add_option({options::uri_path, std::string(seg)});
    if (pos == std::string_view::npos) break;
    path.remove_prefix(pos + 1);
  }
}

void Message::add_uri_query(std::string_view query) { add_option({options::uri_query, std::string(query)}); }

Bytes encode_coap(const Message& m) {
  if (m.token.size() > 8) fail(CodecError::Kind::invariant_violation, "token longer than 8 bytes");
  Bytes out;
  out.reserve(4 + m.token.size() + m.payload.size() + 16);
  out.push_back(static_cast<std::uint8_t>((1u << 6) | (static_cast<std::uint8_t>(m.type) << 4) | m.token.size()));
  out.push_back(m.code.raw);
  out.push_back(static_cast<std::uint8_t>(m.message_id >> 8));
  out.push_back(static_cast<std::uint8_t>(m.message_id & 0xFF));
  out.insert(out.end(), m.token.begin(), m.token.end());

  std::uint32_t prev = 0;
  for (const auto& o : m.options) {
    if (o.number < prev) fail(CodecError::Kind::invariant_violation, "options not in ascending order");
    if (o.value.size() > 0xFFFF + 269u) fail(CodecError::Kind::invariant_violation, "option value too long");
    const std::uint32_t delta = o.number - prev;
    const auto len = static_cast<std::uint32_t>(o.value.size());
    out.push_back(static_cast<std::uint8_t>((nibble_for(delta) << 4) | nibble_for(len)));
    put_extension(out, delta);
    put_extension(out, len);
    out.insert(out.end(), o.value.begin(), o.value.end());
    prev = o.number;
  }
  if (!m.payload.empty()) {
    out.push_back(kPayloadMarker);
    out.insert(out.end(), m.payload.begin(), m.payload.end());
  }
  return out;
}

Message decode_coap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) fail(CodecError::Kind::truncated, "message shorter than the 4-byte header");
  if ((bytes[0] >> 6) != 1) fail(CodecError::Kind::bad_version, "version is not 1");
  const std::size_t tkl = bytes[0] & 0x0F;
  if (tkl > 8) fail(CodecError::Kind::bad_token_length, "token length over 8");

  Message m;
  m.type = static_cast<MessageType>((bytes[0] >> 4) & 0x03);
  m.code = Code{bytes[1]};
  m.message_id = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
  std::size_t pos = 4;
  if (pos + tkl > bytes.size()) fail(CodecError::Kind::truncated, "token truncated");
  m.token.assign(bytes.begin() + 4, bytes.begin() + 4 + static_cast<std::ptrdiff_t>(tkl));
  pos += tkl;

  std::uint32_t number = 0;
  while (pos < bytes.size()) {
    const std::uint8_t head = bytes[pos++];
    if (head == kPayloadMarker) {
      if (pos == bytes.size()) fail(CodecError::Kind::truncated, "payload marker without payload");
      m.payload.assign(reinterpret_cast<const char*>(bytes.data() + pos), bytes.size() - pos);
      return m;
    }
    const std::uint32_t delta = read_extension(bytes, pos, head >> 4);
    const std::uint32_t len = read_extension(bytes, pos, head & 0x0F);
    number += delta;
    if (number > 0xFFFF) fail(CodecError::Kind::malformed_option, "option number above 65535");
    if (pos + len > bytes.size()) fail(CodecError::Kind::truncated, "option value truncated");
    m.options.push_back({static_cast<std::uint16_t>(number),
                         std::string(reinterpret_cast<const char*>(bytes.data() + pos), len)});
    pos += len;
  }
  return m;
}

}  // namespace hetbridge::coap
