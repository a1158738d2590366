#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "hetbridge/core/model.hpp"

namespace hetbridge::app {

struct Ports {
  std::uint16_t mqtt = 1883;
  std::uint16_t http = 8080;
  std::uint16_t coap = 5683;
};

/// One schema for every subcommand. Example:
///
///   {"host": "127.0.0.1",
///    "ports": {"mqtt": 1883, "http": 8080, "coap": 5683},
///    "fleet": {"mqtt_devices": 5, "coap_devices": 5, "interval_ms": 1000,
///              "duration_s": 30, "qos": 0, "aligned": false},
///    "middleware": {"token_ttl_s": 86400, "read_requires_auth": false},
///    "log": "text", "out": "runs/latest"}
///
/// Every key is optional; unknown keys are rejected.
struct AppConfig {
  std::string host = "127.0.0.1";
  Ports ports;
  FleetConfig fleet;
  std::chrono::seconds token_ttl{24 * 3600};
  bool read_requires_auth = false;
  std::string log = "text";
  std::optional<std::filesystem::path> out;
};

/// Keys present in the file override `base`. Throws InvalidConfig on
/// unreadable files, bad JSON, wrong types or unknown keys.
AppConfig load_config(const std::filesystem::path& path, AppConfig base = {});
AppConfig parse_config(std::string_view json_text, AppConfig base = {});

/// mqtt = base, http = base + 1, coap = base + 2.
Ports ports_from_base(std::uint16_t base);

/// Reads HETBRIDGE_BASE_PORT. Throws InvalidConfig if set but not a port number.
std::optional<std::uint16_t> env_base_port();

}  // namespace hetbridge::app
