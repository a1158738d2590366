#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetbridge/core/model.hpp"
#include "hetbridge/net/socket.hpp"

namespace hetbridge::sim {

class EndpointUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `{"device":…,"timestamp":…,"message":"seq-<seq>"}`
std::string device_payload(const std::string& device, std::uint64_t seq, Timestamp now);

/// Append-only record of every send attempt. Safe for concurrent writers.
class SendLog {
 public:
  SendLog() = default;
  /// Also mirrors each entry to `path` as NDJSON.
  explicit SendLog(const std::filesystem::path& path);

  void append(const SendLogEntry& e);
  std::vector<SendLogEntry> entries() const;
  std::size_t size() const;

  /// Reads an NDJSON send log.
  static std::vector<SendLogEntry> load(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<SendLogEntry> entries_;
  std::optional<std::ofstream> out_;
};

struct FleetEndpoints {
  net::Endpoint broker;
  net::Endpoint coap_gateway;
  std::string ingest_path = "ingest";
};

/// Device names are "mqtt-1".."mqtt-N" and "coap-1".."coap-M".
std::vector<std::string> device_names(Protocol p, int count);

/// Runs the fleet to completion and returns the send log it filled.
///
/// Every device fires at start + k*interval for k in [0, sends_per_device()).
/// Throws InvalidConfig, or EndpointUnreachable before any send.
void run_fleet(const FleetConfig& cfg, const FleetEndpoints& endpoints, SendLog& log);

}  // namespace hetbridge::sim
