#include "hetbridge/mqtt/codec.hpp"

#include <string_view>

namespace hetbridge::mqtt {

namespace {

[[noreturn]] void fail(CodecError::Kind kind, const std::string& what) { throw CodecError(kind, what); }

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  void str(std::string_view s) {
    if (s.size() > 0xFFFF) fail(CodecError::Kind::invariant_violation, "string longer than 65535 bytes");
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s);
  }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

  std::uint8_t u8() {
    need(1);
    return body_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(body_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string rest() {
    std::string s(reinterpret_cast<const char*>(body_.data() + pos_), body_.size() - pos_);
    pos_ = body_.size();
    return s;
  }
  bool done() const { return pos_ == body_.size(); }
  void expect_done(const char* packet) const {
    if (!done()) fail(CodecError::Kind::malformed_body, std::string(packet) + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (body_.size() - pos_ < n) fail(CodecError::Kind::malformed_body, "body shorter than its fields");
  }

  std::span<const std::uint8_t> body_;
  std::size_t pos_ = 0;
};

struct Encoded {
  std::uint8_t flags = 0;
  Bytes body;
};

Encoded encode_body(const Connect& p) {
  Writer w;
  w.str("MQTT");
  w.u8(p.protocol_level);
  w.u8(p.clean_session ? 0x02 : 0x00);
  w.u16(p.keep_alive);
  w.str(p.client_id);
  return {0, w.take()};
}

Encoded encode_body(const Connack& p) {
  Writer w;
  w.u8(p.session_present ? 1 : 0);
  w.u8(p.return_code);
  return {0, w.take()};
}

Encoded encode_body(const Publish& p) {
  if (p.qos > 2) fail(CodecError::Kind::invariant_violation, "PUBLISH qos must be 0..2");
  if (p.qos == 0 && p.packet_id) fail(CodecError::Kind::invariant_violation, "qos-0 PUBLISH carries a packet id");
  if (p.qos > 0 && (!p.packet_id || *p.packet_id == 0)) {
    fail(CodecError::Kind::invariant_violation, "qos>0 PUBLISH needs a nonzero packet id");
  }
  if (p.qos == 0 && p.dup) fail(CodecError::Kind::invariant_violation, "qos-0 PUBLISH cannot set DUP");
  if (p.topic.empty()) fail(CodecError::Kind::invariant_violation, "PUBLISH topic is empty");
  Writer w;
  w.str(p.topic);
  if (p.packet_id) w.u16(*p.packet_id);
  w.raw(p.payload);
  const auto flags = static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 0x01 : 0));
  return {flags, w.take()};
}

Encoded encode_body(const Puback& p) {
  Writer w;
  w.u16(p.packet_id);
  return {0, w.take()};
}

Encoded encode_body(const Subscribe& p) {
  if (p.packet_id == 0) fail(CodecError::Kind::invariant_violation, "SUBSCRIBE needs a nonzero packet id");
  if (p.topics.empty()) fail(CodecError::Kind::invariant_violation, "SUBSCRIBE needs at least one filter");
  Writer w;
  w.u16(p.packet_id);
  for (const auto& t : p.topics) {
    if (t.qos > 2) fail(CodecError::Kind::invariant_violation, "requested qos must be 0..2");
    w.str(t.filter);
    w.u8(t.qos);
  }
  return {0x02, w.take()};
}

Encoded encode_body(const Suback& p) {
  if (p.return_codes.empty()) fail(CodecError::Kind::invariant_violation, "SUBACK needs at least one code");
  Writer w;
  w.u16(p.packet_id);
  for (auto rc : p.return_codes) w.u8(rc);
  return {0, w.take()};
}

Encoded encode_body(const Pingreq&) { return {}; }
Encoded encode_body(const Pingresp&) { return {}; }
Encoded encode_body(const Disconnect&) { return {}; }

Packet decode_body(PacketType type, std::uint8_t flags, std::span<const std::uint8_t> body) {
  Reader r(body);
  auto require_flags = [&](std::uint8_t expected, const char* name) {
    if (flags != expected) fail(CodecError::Kind::malformed_body, std::string(name) + ": reserved flags set");
  };

  switch (type) {
    case PacketType::connect: {
      require_flags(0, "CONNECT");
      if (r.str() != "MQTT") fail(CodecError::Kind::malformed_body, "CONNECT: protocol name is not MQTT");
      Connect p;
      p.protocol_level = r.u8();
      const std::uint8_t cf = r.u8();
      if (cf & 0x01) fail(CodecError::Kind::malformed_body, "CONNECT: reserved flag set");
      if (cf & 0xFC) fail(CodecError::Kind::malformed_body, "CONNECT: will/username/password not supported");
      p.clean_session = (cf & 0x02) != 0;
      p.keep_alive = r.u16();
      p.client_id = r.str();
      r.expect_done("CONNECT");
      return p;
    }
    case PacketType::connack: {
      require_flags(0, "CONNACK");
      const std::uint8_t ack_flags = r.u8();
      if (ack_flags & 0xFE) fail(CodecError::Kind::malformed_body, "CONNACK: reserved flags set");
      Connack p{(ack_flags & 0x01) != 0, r.u8()};
      r.expect_done("CONNACK");
      return p;
    }
    case PacketType::publish: {
      Publish p;
      p.dup = (flags & 0x08) != 0;
      p.qos = (flags >> 1) & 0x03;
      p.retain = (flags & 0x01) != 0;
      if (p.qos == 3) fail(CodecError::Kind::malformed_body, "PUBLISH: qos 3 is reserved");
      if (p.qos == 0 && p.dup) fail(CodecError::Kind::malformed_body, "PUBLISH: DUP set on qos 0");
      p.topic = r.str();
      if (p.topic.empty()) fail(CodecError::Kind::malformed_body, "PUBLISH: empty topic");
      if (p.qos > 0) {
        p.packet_id = r.u16();
        if (*p.packet_id == 0) fail(CodecError::Kind::malformed_body, "PUBLISH: zero packet id");
      }
      p.payload = r.rest();
      return p;
    }
    case PacketType::puback: {
      require_flags(0, "PUBACK");
      Puback p{r.u16()};
      r.expect_done("PUBACK");
      return p;
    }
    case PacketType::subscribe: {
      require_flags(0x02, "SUBSCRIBE");
      Subscribe p;
      p.packet_id = r.u16();
      if (p.packet_id == 0) fail(CodecError::Kind::malformed_body, "SUBSCRIBE: zero packet id");
      while (!r.done()) {
        TopicRequest t;
        t.filter = r.str();
        t.qos = r.u8();
        if (t.qos > 2) fail(CodecError::Kind::malformed_body, "SUBSCRIBE: bad requested qos");
        p.topics.push_back(std::move(t));
      }
      if (p.topics.empty()) fail(CodecError::Kind::malformed_body, "SUBSCRIBE: no filters");
      return p;
    }
    case PacketType::suback: {
      require_flags(0, "SUBACK");
      Suback p;
      p.packet_id = r.u16();
      while (!r.done()) {
        const std::uint8_t rc = r.u8();
        if (rc > 2 && rc != kSubackFailure) fail(CodecError::Kind::malformed_body, "SUBACK: bad return code");
        p.return_codes.push_back(rc);
      }
      if (p.return_codes.empty()) fail(CodecError::Kind::malformed_body, "SUBACK: no return codes");
      return p;
    }
    case PacketType::pingreq:
      require_flags(0, "PINGREQ");
      r.expect_done("PINGREQ");
      return Pingreq{};
    case PacketType::pingresp:
      require_flags(0, "PINGRESP");
      r.expect_done("PINGRESP");
      return Pingresp{};
    case PacketType::disconnect:
      require_flags(0, "DISCONNECT");
      r.expect_done("DISCONNECT");
      return Disconnect{};
  }
  fail(CodecError::Kind::unknown_packet_type, "unknown packet type");
}

bool is_supported(std::uint8_t type) {
  switch (type) {
    case 1: case 2: case 3: case 4: case 8: case 9: case 12: case 13: case 14:
      return true;
    default:
      return false;
  }
}

}  // namespace

PacketType packet_type(const Packet& p) noexcept {
  static constexpr PacketType kTypes[] = {
      PacketType::connect,   PacketType::connack, PacketType::publish,  PacketType::puback,    PacketType::subscribe,
      PacketType::suback,    PacketType::pingreq, PacketType::pingresp, PacketType::disconnect,
  };
  return kTypes[p.index()];
}

const char* packet_name(PacketType t) noexcept {
  switch (t) {
    case PacketType::connect: return "CONNECT";
    case PacketType::connack: return "CONNACK";
    case PacketType::publish: return "PUBLISH";
    case PacketType::puback: return "PUBACK";
    case PacketType::subscribe: return "SUBSCRIBE";
    case PacketType::suback: return "SUBACK";
    case PacketType::pingreq: return "PINGREQ";
    case PacketType::pingresp: return "PINGRESP";
    case PacketType::disconnect: return "DISCONNECT";
  }
  return "?";
}

Bytes encode_remaining_length(std::uint32_t n) {
  if (n > kMaxRemainingLength) fail(CodecError::Kind::out_of_range, "remaining length exceeds 268435455");
  Bytes out;
  do {
    std::uint8_t digit = n % 128;
    n /= 128;
    if (n > 0) digit |= 0x80;
    out.push_back(digit);
  } while (n > 0);
  return out;
}

LengthPrefix decode_remaining_length(std::span<const std::uint8_t> bytes) {
  std::uint32_t value = 0;
  std::uint32_t multiplier = 1;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) fail(CodecError::Kind::truncated, "remaining length truncated");
    const std::uint8_t b = bytes[i];
    value += (b & 0x7F) * multiplier;
    if ((b & 0x80) == 0) return {value, i + 1};
    multiplier *= 128;
  }
  fail(CodecError::Kind::overlong, "remaining length longer than 4 bytes");
}

Bytes encode_packet(const Packet& p) {
  Encoded e = std::visit([](const auto& pkt) { return encode_body(pkt); }, p);
  if (e.body.size() > kMaxRemainingLength) fail(CodecError::Kind::invariant_violation, "packet too large");
  Bytes out;
  out.reserve(e.body.size() + 5);
  out.push_back(static_cast<std::uint8_t>((static_cast<std::uint8_t>(packet_type(p)) << 4) | e.flags));
  const Bytes len = encode_remaining_length(static_cast<std::uint32_t>(e.body.size()));
  out.insert(out.end(), len.begin(), len.end());
  out.insert(out.end(), e.body.begin(), e.body.end());
  return out;
}

Decoded decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) fail(CodecError::Kind::truncated, "empty input");
  const std::uint8_t type = bytes[0] >> 4;
  const std::uint8_t flags = bytes[0] & 0x0F;
  if (!is_supported(type)) {
    fail(CodecError::Kind::unknown_packet_type, "unknown packet type " + std::to_string(type));
  }
  const LengthPrefix len = decode_remaining_length(bytes.subspan(1));
  const std::size_t header = 1 + len.consumed;
  if (bytes.size() - header < len.value) fail(CodecError::Kind::truncated, "packet body truncated");
  Packet p = decode_body(static_cast<PacketType>(type), flags, bytes.subspan(header, len.value));
  return {std::move(p), header + len.value};
}

}  // namespace hetbridge::mqtt
