#pragma once

// MQTT 3.1.1 wire codec for the packet subset the broker and clients use.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hetbridge::mqtt {

using Bytes = std::vector<std::uint8_t>;

class CodecError : public std::runtime_error {
 public:
  enum class Kind {
    out_of_range,
    truncated,
    overlong,
    unknown_packet_type,
    malformed_body,
    invariant_violation,
  };

  CodecError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class PacketType : std::uint8_t {
  connect = 1,
  connack = 2,
  publish = 3,
  puback = 4,
  subscribe = 8,
  suback = 9,
  pingreq = 12,
  pingresp = 13,
  disconnect = 14,
};

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;
inline constexpr std::uint8_t kSubackFailure = 0x80;

struct Connect {
  std::string client_id;
  bool clean_session = true;
  std::uint16_t keep_alive = 0;
  /// Protocol level; 4 is MQTT 3.1.1.
  std::uint8_t protocol_level = 4;
  bool operator==(const Connect&) const = default;
};

struct Connack {
  bool session_present = false;
  std::uint8_t return_code = 0;
  bool operator==(const Connack&) const = default;
};

/// qos 0 carries no packet id; qos 1 and 2 carry one.
struct Publish {
  std::string topic;
  std::string payload;
  std::uint8_t qos = 0;
  std::optional<std::uint16_t> packet_id;
  bool dup = false;
  bool retain = false;
  bool operator==(const Publish&) const = default;
};

struct Puback {
  std::uint16_t packet_id = 0;
  bool operator==(const Puback&) const = default;
};

struct TopicRequest {
  std::string filter;
  std::uint8_t qos = 0;
  bool operator==(const TopicRequest&) const = default;
};

/// Nonzero packet id and at least one filter.
struct Subscribe {
  std::uint16_t packet_id = 1;
  std::vector<TopicRequest> topics;
  bool operator==(const Subscribe&) const = default;
};

struct Suback {
  std::uint16_t packet_id = 1;
  std::vector<std::uint8_t> return_codes;
  bool operator==(const Suback&) const = default;
};

struct Pingreq {
  bool operator==(const Pingreq&) const = default;
};
struct Pingresp {
  bool operator==(const Pingresp&) const = default;
};
struct Disconnect {
  bool operator==(const Disconnect&) const = default;
};

using Packet =
    std::variant<Connect, Connack, Publish, Puback, Subscribe, Suback, Pingreq, Pingresp, Disconnect>;

PacketType packet_type(const Packet& p) noexcept;
const char* packet_name(PacketType t) noexcept;

/// Base-128 varint, 1 to 4 bytes. Throws CodecError(out_of_range) above kMaxRemainingLength.
Bytes encode_remaining_length(std::uint32_t n);

struct LengthPrefix {
  std::uint32_t value = 0;
  std::size_t consumed = 0;
};

/// Throws CodecError(truncated) or CodecError(overlong).
LengthPrefix decode_remaining_length(std::span<const std::uint8_t> bytes);

Bytes encode_packet(const Packet& p);

struct Decoded {
  Packet packet;
  std::size_t consumed = 0;
};

/// Decodes one packet from the front of `bytes`.
Decoded decode_packet(std::span<const std::uint8_t> bytes);

}  // namespace hetbridge::mqtt
