#include "hetbridge/app/demo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <thread>

#include <unistd.h>

#include "hetbridge/app/stack.hpp"
#include "hetbridge/core/log.hpp"
#include "hetbridge/sim/fleet.hpp"

namespace hetbridge::app {

namespace {

using namespace std::chrono_literals;

std::filesystem::path fresh_run_dir() {
  std::random_device rd;
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "%08x", rd());
  return std::filesystem::temp_directory_path() /
         ("hetbridge-run-" + std::to_string(::getpid()) + "-" + suffix);
}

std::string fmt2(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Waits until every successful send is stored, or the count stops moving.
void drain(storage::ReadingStore& store, std::size_t target) {
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  std::size_t last = store.size();
  auto last_change = std::chrono::steady_clock::now();
  while (store.size() < target && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(50ms);
    if (store.size() != last) {
      last = store.size();
      last_change = std::chrono::steady_clock::now();
    } else if (std::chrono::steady_clock::now() - last_change > 1500ms) {
      break;
    }
  }
}

}  // namespace

bool DemoReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

LatencyStats latency_stats(const std::vector<StoredReading>& rows, Protocol p) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.protocol == p) v.push_back(to_seconds(r.sec_diff));
  }
  LatencyStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min_s = v.front();
  s.max_s = v.back();
  const std::size_t mid = v.size() / 2;
  s.median_s = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
  return s;
}

analysis::RunOutputs analyze_run_dir(const std::filesystem::path& run_dir) {
  if (!std::filesystem::is_directory(run_dir)) throw std::runtime_error("no such run directory: " + run_dir.string());
  const auto readings_path = run_dir / kReadingsFile;
  if (!std::filesystem::exists(readings_path)) throw std::runtime_error("missing " + readings_path.string());
  auto store = storage::ReadingStore::recover(readings_path);
  const auto send_log = sim::SendLog::load(run_dir / kSendLogFile);
  return analysis::write_run_outputs(run_dir, store->all(), send_log);
}

DemoReport run_demo(const DemoOptions& options) {
  DemoReport report;
  report.run_dir = options.out.value_or(fresh_run_dir());
  std::filesystem::create_directories(report.run_dir);
  const FleetConfig& fleet = options.fleet;
  validate(fleet);
  report.expected = static_cast<std::size_t>(fleet.mqtt_devices + fleet.coap_devices) *
                    static_cast<std::size_t>(fleet.sends_per_device());

  StackOptions so;
  if (options.ports) so.ports = *options.ports;
  so.wal = report.run_dir / kReadingsFile;
  Stack stack(so);
  stack.start();
  log::info("demo: broker {}, middleware {}, coap gateway {}, run dir {}", stack.broker_endpoint().to_string(),
            stack.middleware_url(), stack.coap_endpoint().to_string(), report.run_dir.string());

  sim::SendLog send_log(report.run_dir / kSendLogFile);
  sim::run_fleet(fleet, {stack.broker_endpoint(), stack.coap_endpoint()}, send_log);

  std::size_t sent_ok = 0;
  for (const auto& e : send_log.entries()) sent_ok += e.outcome == SendOutcome::sent;
  log::info("demo: fleet done, {} sends ok, draining", sent_ok);
  drain(stack.store(), sent_ok);
  stack.stop();
  log::info("demo: stack stopped with {} readings stored", stack.store().size());

  const auto readings = stack.store().all();
  report.outputs = analysis::write_run_outputs(report.run_dir, readings, send_log.entries());
  const auto window = analysis::select_window(readings, fleet.duration_s);
  report.mqtt_latency = latency_stats(window, Protocol::mqtt);
  report.coap_latency = latency_stats(window, Protocol::coap);

  const auto& t = options.thresholds;
  const auto& loss = report.outputs.loss;
  const double stored_fraction =
      report.expected ? static_cast<double>(loss.stored) / static_cast<double>(report.expected) : 0.0;
  report.checks.push_back({"stored fraction", stored_fraction >= t.min_stored_fraction,
                           std::to_string(loss.stored) + "/" + std::to_string(report.expected) + " (need >= " +
                               fmt2(t.min_stored_fraction * 100, 1) + "%)"});

  ProtocolCounts totals;
  for (const auto& r : readings) ++totals[r.protocol];
  const auto share = analysis::summarize_counts(totals.mqtt, totals.coap);
  const double expected_mqtt_pct =
      100.0 * fleet.mqtt_devices / static_cast<double>(fleet.mqtt_devices + fleet.coap_devices);
  const bool share_ok = !share.empty && std::abs(share.mqtt_pct - expected_mqtt_pct) <= t.share_tolerance_pct;
  report.checks.push_back({"protocol share", share_ok,
                           "mqtt " + fmt2(share.mqtt_pct, 1) + "% / coap " + fmt2(share.coap_pct, 1) + "% (expect " +
                               fmt2(expected_mqtt_pct, 1) + " +/- " + fmt2(t.share_tolerance_pct, 1) + ")"});

  if (fleet.coap_devices > 0) {
    const auto& c = report.coap_latency;
    report.checks.push_back({"coap median sec_diff", c.count > 0 && c.median_s < t.coap_median_max_s,
                             fmt2(c.median_s) + " s (need < " + fmt2(t.coap_median_max_s, 3) + ")"});
    report.checks.push_back({"coap sec_diff spread", c.count > 0 && c.max_s - c.min_s < t.coap_spread_max_s,
                             fmt2(c.max_s - c.min_s) + " s (need < " + fmt2(t.coap_spread_max_s, 3) + ")"});
  }
  if (fleet.mqtt_devices > 0) {
    const auto& m = report.mqtt_latency;
    report.checks.push_back({"mqtt median sec_diff", m.count > 0 && m.median_s < t.mqtt_median_max_s,
                             fmt2(m.median_s) + " s (need < " + fmt2(t.mqtt_median_max_s, 3) + ")"});
  }
  return report;
}

void print_summary(std::ostream& out, const DemoReport& r) {
  const auto& loss = r.outputs.loss;
  out << "run directory: " << r.run_dir.string() << "\n";
  out << "sent " << loss.sent << "  send_failed " << loss.send_failed << "  stored " << loss.stored << "  lost "
      << loss.lost << " (mqtt " << loss.lost_by_protocol.mqtt << ", coap " << loss.lost_by_protocol.coap << ")\n\n";
  out << "window  mqtt  coap  mqtt%  coap%\n";
  for (const auto& [w, s] : r.outputs.distributions) {
    char line[96];
    std::snprintf(line, sizeof line, "%4llds  %4zu  %4zu  %5.1f  %5.1f\n", static_cast<long long>(w), s.mqtt, s.coap,
                  s.mqtt_pct, s.coap_pct);
    out << line;
  }
  out << "\nprotocol  count  median_s  min_s    max_s\n";
  for (auto [name, s] : {std::pair{"mqtt", r.mqtt_latency}, std::pair{"coap", r.coap_latency}}) {
    char line[96];
    std::snprintf(line, sizeof line, "%-8s  %5zu  %8.4f  %7.4f  %7.4f\n", name, s.count, s.median_s, s.min_s,
                  s.max_s);
    out << line;
  }
  out << "\n";
  for (const auto& c : r.checks) out << (c.passed ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
}

}  // namespace hetbridge::app
