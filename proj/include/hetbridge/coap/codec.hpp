#pragma once

// RFC 7252 message codec for the subset used here (no blockwise, no observe).

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hetbridge::coap {

using Bytes = std::vector<std::uint8_t>;

class CodecError : public std::runtime_error {
 public:
  enum class Kind { truncated, bad_version, bad_token_length, malformed_option, invariant_violation };
  CodecError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class MessageType : std::uint8_t { con = 0, non = 1, ack = 2, rst = 3 };

/// Class in the top 3 bits, detail in the low 5 ("2.05" is 0x45).
struct Code {
  std::uint8_t raw = 0;

  static constexpr Code make(std::uint8_t cls, std::uint8_t detail) {
    return Code{static_cast<std::uint8_t>((cls << 5) | (detail & 0x1F))};
  }
  constexpr std::uint8_t cls() const { return raw >> 5; }
  constexpr std::uint8_t detail() const { return raw & 0x1F; }
  constexpr bool is_request() const { return cls() == 0 && raw != 0; }
  constexpr bool is_empty() const { return raw == 0; }
  /// Dotted form, e.g. "4.04".
  std::string to_string() const;

  constexpr auto operator<=>(const Code&) const = default;
};

namespace codes {
inline constexpr Code empty = Code::make(0, 0);
inline constexpr Code get = Code::make(0, 1);
inline constexpr Code post = Code::make(0, 2);
inline constexpr Code put = Code::make(0, 3);
inline constexpr Code del = Code::make(0, 4);
inline constexpr Code created = Code::make(2, 1);
inline constexpr Code content = Code::make(2, 5);
inline constexpr Code bad_request = Code::make(4, 0);
inline constexpr Code not_found = Code::make(4, 4);
inline constexpr Code method_not_allowed = Code::make(4, 5);
inline constexpr Code internal_error = Code::make(5, 0);
inline constexpr Code service_unavailable = Code::make(5, 3);
}  // namespace codes

namespace options {
inline constexpr std::uint16_t uri_path = 11;
inline constexpr std::uint16_t content_format = 12;
inline constexpr std::uint16_t uri_query = 15;
}  // namespace options

inline constexpr std::uint32_t kContentFormatJson = 50;

struct Option {
  std::uint16_t number = 0;
  std::string value;

  static Option uint(std::uint16_t number, std::uint32_t v);
  std::uint32_t as_uint() const;
  bool operator==(const Option&) const = default;
};

/// Version is always 1 and therefore not stored.
struct Message {
  MessageType type = MessageType::con;
  Code code;
  std::uint16_t message_id = 0;
  Bytes token;
  /// Ascending by number; repeated numbers keep their relative order.
  std::vector<Option> options;
  std::string payload;

  bool operator==(const Message&) const = default;

  /// Uri-Path segments joined with "/".
  std::string uri_path() const;
  std::vector<std::string> uri_queries() const;
  std::optional<std::uint32_t> content_format() const;

  /// Inserts keeping ascending option order.
  void add_option(Option opt);
  void set_uri_path(std::string_view path);
  void add_uri_query(std::string_view query);
};

/// Throws CodecError(invariant_violation) for unsorted options or tokens over 8 bytes.
Bytes encode_coap(const Message& m);
Message decode_coap(std::span<const std::uint8_t> bytes);

}  // namespace hetbridge::coap
