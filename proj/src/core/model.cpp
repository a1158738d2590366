#include "hetbridge/core/model.hpp"

#include <cmath>
#include <cstdio>

namespace hetbridge {

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::mqtt ? "mqtt" : "coap";
}

std::optional<Protocol> parse_protocol(std::string_view text) noexcept {
  if (text == "mqtt") return Protocol::mqtt;
  if (text == "coap") return Protocol::coap;
  return std::nullopt;
}

Timestamp Timestamp::now() {
  return Timestamp(std::chrono::time_point_cast<std::chrono::microseconds>(Clock::now()));
}

namespace {

bool read_digits(std::string_view text, std::size_t pos, std::size_t n, int& out) {
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  return true;
}

}  // namespace

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS.ffffffZ
  if (text.size() != 27) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != '.' || text[26] != 'Z') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, s, frac;
  if (!read_digits(text, 0, 4, y) || !read_digits(text, 5, 2, mo) || !read_digits(text, 8, 2, d) ||
      !read_digits(text, 11, 2, h) || !read_digits(text, 14, 2, mi) ||
      !read_digits(text, 17, 2, s) || !read_digits(text, 20, 6, frac)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  const auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + microseconds{frac};
  return Timestamp(time_point_cast<microseconds>(tp));
}

std::string Timestamp::to_string() const {
  using namespace std::chrono;
  const auto day_start = floor<days>(tp_);
  const year_month_day ymd{day_start};
  const hh_mm_ss tod{tp_ - day_start};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02lld.%06lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()),
                static_cast<long long>(tod.subseconds().count()));
  return buf;
}

std::string format_seconds(std::chrono::microseconds d) {
  const long long us = d.count();
  const unsigned long long mag = us < 0 ? -static_cast<unsigned long long>(us) : us;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%llu.%06llu", us < 0 ? "-" : "", mag / 1000000ULL, mag % 1000000ULL);
  return buf;
}

double to_seconds(std::chrono::microseconds d) noexcept {
  return static_cast<double>(d.count()) / 1e6;
}

std::chrono::microseconds from_seconds(double s) noexcept {
  return std::chrono::microseconds(std::llround(s * 1e6));
}

bool is_valid_device_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > kMaxDeviceIdLength) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
    if (!ok) return false;
  }
  return true;
}

void validate(const FleetConfig& cfg) {
  if (cfg.mqtt_devices < 0 || cfg.coap_devices < 0) throw InvalidConfig("device counts must be >= 0");
  if (cfg.mqtt_devices + cfg.coap_devices < 1) throw InvalidConfig("fleet needs at least one device");
  if (cfg.interval_ms <= 0) throw InvalidConfig("interval_ms must be positive");
  if (cfg.duration_s <= 0) throw InvalidConfig("duration_s must be positive");
  if (cfg.qos != 0 && cfg.qos != 1) throw InvalidConfig("qos must be 0 or 1");
}

}  // namespace hetbridge
