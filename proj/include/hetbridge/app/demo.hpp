#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hetbridge/analysis/analysis.hpp"
#include "hetbridge/app/config.hpp"

namespace hetbridge::app {

/// Pass/fail bounds for a demo run on loopback.
struct DemoThresholds {
  double min_stored_fraction = 0.95;
  /// Each protocol's share may differ from its fleet share by this many points.
  double share_tolerance_pct = 10.0;
  double coap_median_max_s = 0.05;
  double coap_spread_max_s = 0.05;
  double mqtt_median_max_s = 1.0;
};

struct DemoOptions {
  FleetConfig fleet;
  /// Empty: a fresh directory under the system temp dir.
  std::optional<std::filesystem::path> out;
  /// Unset: all servers bind ephemeral loopback ports.
  std::optional<Ports> ports;
  DemoThresholds thresholds;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct LatencyStats {
  std::size_t count = 0;
  double median_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
};

struct DemoReport {
  std::filesystem::path run_dir;
  std::size_t expected = 0;
  analysis::RunOutputs outputs;
  LatencyStats mqtt_latency;
  LatencyStats coap_latency;
  std::vector<Check> checks;

  bool passed() const;
};

/// Median/min/max of sec_diff for one protocol over the given rows.
LatencyStats latency_stats(const std::vector<StoredReading>& rows, Protocol p);

/// Runs the fleet against an in-process stack, analyzes the run directory and
/// evaluates the thresholds.
DemoReport run_demo(const DemoOptions& options);

/// Loads readings.ndjson and sendlog.ndjson from a run directory and rewrites
/// the analysis outputs. Throws std::runtime_error if the inputs are missing.
analysis::RunOutputs analyze_run_dir(const std::filesystem::path& run_dir);

void print_summary(std::ostream& out, const DemoReport& report);

inline constexpr const char* kReadingsFile = "readings.ndjson";
inline constexpr const char* kSendLogFile = "sendlog.ndjson";

}  // namespace hetbridge::app
