#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetbridge/core/model.hpp"

namespace hetbridge::analysis {

class RunMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows with inserted_ts in (newest - window_s, newest], ascending by inserted_ts then id.
std::vector<StoredReading> select_window(const std::vector<StoredReading>& readings, std::int64_t window_s);

/// "inserted_ts,protocol,sec_diff" then one row per reading in the window.
std::string travel_time_csv(const std::vector<StoredReading>& readings, std::int64_t window_s);

struct DistributionSummary {
  std::size_t mqtt = 0;
  std::size_t coap = 0;
  /// Rounded to one decimal; 0/0 when empty.
  double mqtt_pct = 0.0;
  double coap_pct = 0.0;
  bool empty = true;
  std::int64_t window_s = 0;
};

DistributionSummary distribution_summary(const std::vector<StoredReading>& readings, std::int64_t window_s);
DistributionSummary summarize_counts(std::size_t mqtt, std::size_t coap, std::int64_t window_s = 0);
/// "protocol,count,pct" with one row per protocol.
std::string distribution_csv(const DistributionSummary& s);

struct LossReport {
  std::size_t sent = 0;
  std::size_t send_failed = 0;
  std::size_t stored = 0;
  std::size_t lost = 0;
  ProtocolCounts lost_by_protocol;
};

/// Joins stored readings to successful sends on (device, seq) taken from the
/// "seq-<n>" message. Throws RunMismatch for readings that no send explains.
LossReport loss_report(const std::vector<SendLogEntry>& send_log, const std::vector<StoredReading>& readings);
std::string to_json(const LossReport& r);

/// 800x400 chart, one polyline per protocol present. Pure function of its input.
std::string render_travel_svg(const std::vector<StoredReading>& window_rows, const std::string& title);
/// Two-bar chart with count and percentage labels.
std::string render_distribution_svg(const DistributionSummary& s, const std::string& title);

inline const std::vector<std::int64_t> kTravelWindows = {5, 10, 30};
inline const std::vector<std::int64_t> kDistributionWindows = {1, 5, 30};

struct RunOutputs {
  std::map<std::int64_t, DistributionSummary> distributions;
  std::map<std::int64_t, std::size_t> travel_rows;
  LossReport loss;
  std::vector<std::filesystem::path> files;
};

/// Writes travel_{5,10,30}s.{csv,svg}, dist_{1,5,30}s.{csv,svg} and loss.json.
RunOutputs write_run_outputs(const std::filesystem::path& run_dir, const std::vector<StoredReading>& readings,
                             const std::vector<SendLogEntry>& send_log);

}  // namespace hetbridge::analysis
