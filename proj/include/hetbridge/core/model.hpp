#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hetbridge {

enum class Protocol { mqtt, coap };

/// Lowercase wire spelling: "mqtt" or "coap".
std::string_view to_string(Protocol p) noexcept;
std::optional<Protocol> parse_protocol(std::string_view text) noexcept;

/// UTC instant with microsecond precision.
///
/// The canonical text form is fixed width (`2024-03-01T12:00:00.000000Z`),
/// so lexicographic order of the text equals chronological order.
class Timestamp {
 public:
  using Clock = std::chrono::system_clock;
  using TimePoint = std::chrono::sys_time<std::chrono::microseconds>;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(TimePoint tp) : tp_(tp) {}

  static Timestamp now();
  static constexpr Timestamp from_micros(std::int64_t us) {
    return Timestamp(TimePoint(std::chrono::microseconds(us)));
  }

  /// Accepts only the canonical form; years 0000-9999.
  static std::optional<Timestamp> parse(std::string_view text);

  std::string to_string() const;
  constexpr std::int64_t micros() const { return tp_.time_since_epoch().count(); }
  constexpr TimePoint time_point() const { return tp_; }

  constexpr Timestamp operator+(std::chrono::microseconds d) const { return Timestamp(tp_ + d); }
  constexpr Timestamp operator-(std::chrono::microseconds d) const { return Timestamp(tp_ - d); }
  constexpr std::chrono::microseconds operator-(Timestamp other) const { return tp_ - other.tp_; }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  TimePoint tp_{};
};

/// Signed travel time `inserted - origin`. Negative values are kept as-is.
constexpr std::chrono::microseconds compute_sec_diff(Timestamp origin, Timestamp inserted) {
  return inserted - origin;
}

/// Seconds as a decimal fraction with six digits, e.g. "-0.001000".
std::string format_seconds(std::chrono::microseconds d);
double to_seconds(std::chrono::microseconds d) noexcept;
/// Inverse of to_seconds, rounding to the nearest microsecond.
std::chrono::microseconds from_seconds(double s) noexcept;

inline constexpr std::size_t kMaxDeviceIdLength = 64;

/// Nonempty, at most 64 chars, charset [a-z0-9-].
bool is_valid_device_id(std::string_view id) noexcept;

/// Canonical normalized reading, gateway -> middleware.
struct IngestRecord {
  std::string device;
  Protocol protocol = Protocol::mqtt;
  std::string message;
  Timestamp origin_ts;

  bool operator==(const IngestRecord&) const = default;
};

struct StoredReading {
  std::int64_t id = 0;
  std::string device;
  Protocol protocol = Protocol::mqtt;
  std::string message;
  Timestamp origin_ts;
  Timestamp inserted_ts;
  std::chrono::microseconds sec_diff{0};

  IngestRecord record() const { return {device, protocol, message, origin_ts}; }
  bool operator==(const StoredReading&) const = default;
};

/// Query over stored readings. The time range is half-open: [since, until).
/// An absent limit means unbounded; the HTTP layer enforces 1..10000.
struct ReadingsFilter {
  std::optional<Protocol> protocol;
  std::optional<Timestamp> since;
  std::optional<Timestamp> until;
  std::optional<std::size_t> limit;

  bool matches(const StoredReading& r) const {
    if (protocol && r.protocol != *protocol) return false;
    if (since && r.inserted_ts < *since) return false;
    if (until && !(r.inserted_ts < *until)) return false;
    return true;
  }
};

/// The last `window_s` seconds ending at `newest`, inclusive of `newest`:
/// (newest - window_s, newest], expressed as a half-open filter range.
struct WindowRange {
  Timestamp since;
  Timestamp until;
};

constexpr WindowRange window_ending_at(Timestamp newest, std::int64_t window_s) {
  using std::chrono::microseconds;
  return {newest - microseconds(window_s * 1'000'000) + microseconds(1), newest + microseconds(1)};
}

struct ProtocolCounts {
  std::size_t mqtt = 0;
  std::size_t coap = 0;

  std::size_t& operator[](Protocol p) { return p == Protocol::mqtt ? mqtt : coap; }
  std::size_t operator[](Protocol p) const { return p == Protocol::mqtt ? mqtt : coap; }
  std::size_t total() const { return mqtt + coap; }
  bool operator==(const ProtocolCounts&) const = default;
};

struct FleetConfig {
  int mqtt_devices = 5;
  int coap_devices = 5;
  int interval_ms = 1000;
  int duration_s = 30;
  int qos = 0;
  /// Pin every device's start offset to zero (synchronized bursts).
  bool aligned = false;

  int sends_per_device() const { return duration_s * 1000 / interval_ms; }
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws InvalidConfig.
void validate(const FleetConfig& cfg);

enum class SendOutcome { sent, send_failed };

struct SendLogEntry {
  std::string device;
  Protocol protocol = Protocol::mqtt;
  std::uint64_t seq = 0;
  Timestamp origin_ts;
  SendOutcome outcome = SendOutcome::sent;

  bool operator==(const SendLogEntry&) const = default;
};

}  // namespace hetbridge
