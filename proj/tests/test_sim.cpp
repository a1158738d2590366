#include <gtest/gtest.h>
#include <unistd.h>

#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "hetbridge/app/stack.hpp"
#include "hetbridge/core/json_codec.hpp"
#include "hetbridge/gateway/normalize.hpp"
#include "hetbridge/sim/fleet.hpp"
#include "support/oracles.hpp"

using namespace hetbridge;
using namespace hetbridge::sim;
using namespace std::chrono_literals;

namespace {

FleetConfig fleet(int mqtt, int coap, int interval_ms, int duration_s) {
  FleetConfig cfg;
  cfg.mqtt_devices = mqtt;
  cfg.coap_devices = coap;
  cfg.interval_ms = interval_ms;
  cfg.duration_s = duration_s;
  return cfg;
}

std::uint16_t unused_port() {
  net::TcpListener l(net::Endpoint{"127.0.0.1", 0});
  return l.port();
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         (name + "-" + std::to_string(::getpid()) + "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
}

}  // namespace

TEST(DevicePayload, ShapeAndKeyOrder) {
  const auto ts = *Timestamp::parse("2024-03-01T12:00:00.000000Z");
  EXPECT_EQ(device_payload("mqtt-1", 4, ts),
            R"({"device":"mqtt-1","timestamp":"2024-03-01T12:00:00.000000Z","message":"seq-4"})");
  // Whatever a device sends, a gateway accepts.
  const auto r = gateway::normalize_mqtt("iot/mqtt-1/data", device_payload("mqtt-1", 4, ts));
  EXPECT_EQ(r.message, "seq-4");
  EXPECT_EQ(r.origin_ts, ts);
}

TEST(DeviceNames, Numbering) {
  EXPECT_EQ(device_names(Protocol::coap, 3), (std::vector<std::string>{"coap-1", "coap-2", "coap-3"}));
  EXPECT_TRUE(device_names(Protocol::mqtt, 0).empty());
}

TEST(FleetConfig, SendsPerDevice) {
  EXPECT_EQ(fleet(1, 0, 1000, 3).sends_per_device(), 3);
  EXPECT_EQ(fleet(5, 5, 1000, 30).sends_per_device(), 30);
  EXPECT_EQ(fleet(1, 0, 700, 2).sends_per_device(), 2);
}

TEST(RunFleet, InvalidConfigBeforeAnything) {
  SendLog log;
  EXPECT_THROW(run_fleet(fleet(0, 0, 1000, 1), {}, log), InvalidConfig);
  EXPECT_THROW(run_fleet(fleet(1, 0, 0, 1), {}, log), InvalidConfig);
  auto q2 = fleet(1, 0, 100, 1);
  q2.qos = 2;
  EXPECT_THROW(run_fleet(q2, {}, log), InvalidConfig);
  EXPECT_EQ(log.size(), 0u);
}

TEST(RunFleet, UnreachableEndpoints) {
  SendLog log;
  FleetEndpoints dead{{"127.0.0.1", unused_port()}, {"127.0.0.1", unused_port()}};
  EXPECT_THROW(run_fleet(fleet(1, 0, 100, 1), dead, log), EndpointUnreachable);
  EXPECT_THROW(run_fleet(fleet(0, 1, 100, 1), dead, log), EndpointUnreachable);
  EXPECT_EQ(log.size(), 0u);
}

TEST(RunFleet, SingleMqttDeviceSendsThreeTimes) {
  app::Stack stack(app::StackOptions{});
  stack.start();
  SendLog log;
  const auto t0 = std::chrono::steady_clock::now();
  run_fleet(fleet(1, 0, 1000, 3), {stack.broker_endpoint(), stack.coap_endpoint()}, log);
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  EXPECT_GE(elapsed, 2s);
  EXPECT_LT(elapsed, 4s);
  const auto entries = log.entries();
  ASSERT_EQ(entries.size(), 3u);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    EXPECT_EQ(entries[k].device, "mqtt-1");
    EXPECT_EQ(entries[k].seq, k);
    EXPECT_EQ(entries[k].outcome, SendOutcome::sent);
  }
  ASSERT_TRUE(oracle::eventually([&] { return stack.store().size() == 3; }, 3s));
  stack.stop();
}

TEST(RunFleet, MixedFleetTicksAndDelivers) {
  app::Stack stack(app::StackOptions{});
  stack.start();
  SendLog log;
  run_fleet(fleet(2, 2, 100, 1), {stack.broker_endpoint(), stack.coap_endpoint()}, log);
  const auto entries = log.entries();
  ASSERT_EQ(entries.size(), 40u);

  std::map<std::string, std::vector<Timestamp>> per_device;
  for (const auto& e : entries) {
    EXPECT_EQ(e.outcome, SendOutcome::sent);
    EXPECT_EQ(e.protocol, e.device.rfind("mqtt", 0) == 0 ? Protocol::mqtt : Protocol::coap);
    per_device[e.device].push_back(e.origin_ts);
  }
  ASSERT_EQ(per_device.size(), 4u);
  for (const auto& [dev, times] : per_device) {
    ASSERT_EQ(times.size(), 10u) << dev;
    // Fixed-rate schedule: tick k lands near first + k*interval, no cumulative drift.
    for (std::size_t k = 1; k < times.size(); ++k) {
      const auto expected = times.front() + std::chrono::milliseconds(100 * k);
      EXPECT_LT(std::chrono::abs(times[k] - expected), 50ms) << dev << " tick " << k;
    }
  }
  ASSERT_TRUE(oracle::eventually([&] { return stack.store().size() == 40; }, 5s)) << stack.store().size();
  stack.stop();
}

TEST(RunFleet, AlignedDevicesShareStart) {
  app::Stack stack(app::StackOptions{});
  stack.start();
  SendLog log;
  auto cfg = fleet(3, 0, 500, 1);
  cfg.aligned = true;
  run_fleet(cfg, {stack.broker_endpoint(), stack.coap_endpoint()}, log);
  std::vector<Timestamp> firsts;
  for (const auto& e : log.entries()) {
    if (e.seq == 0) firsts.push_back(e.origin_ts);
  }
  ASSERT_EQ(firsts.size(), 3u);
  const auto [lo, hi] = std::minmax_element(firsts.begin(), firsts.end());
  EXPECT_LT(*hi - *lo, 30ms);
  stack.stop();
}

TEST(SendLog, ConcurrentAppendsAndReload) {
  const auto path = temp_file("sendlog");
  {
    SendLog log(path);
    std::vector<std::thread> ts;
    for (int t = 0; t < 8; ++t) {
      ts.emplace_back([&, t] {
        for (std::uint64_t k = 0; k < 250; ++k) {
          log.append({"coap-" + std::to_string(t + 1), Protocol::coap, k, Timestamp::from_micros(1'000'000 + k),
                      k % 7 ? SendOutcome::sent : SendOutcome::send_failed});
        }
      });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(log.size(), 2000u);
    EXPECT_EQ(SendLog::load(path), log.entries());
  }
  std::filesystem::remove(path);
  EXPECT_THROW(SendLog::load(path), std::runtime_error);
}
