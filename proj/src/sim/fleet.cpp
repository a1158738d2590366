#include "hetbridge/sim/fleet.hpp"

#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "hetbridge/coap/client.hpp"
#include "hetbridge/core/json_codec.hpp"
#include "hetbridge/core/log.hpp"
#include "hetbridge/mqtt/client.hpp"

namespace hetbridge::sim {

using Steady = std::chrono::steady_clock;

std::string device_payload(const std::string& device, std::uint64_t seq, Timestamp now) {
  nlohmann::ordered_json j;
  j["device"] = device;
  j["timestamp"] = now.to_string();
  j["message"] = "seq-" + std::to_string(seq);
  return j.dump();
}

SendLog::SendLog(const std::filesystem::path& path) {
  out_.emplace(path, std::ios::out | std::ios::trunc);
  if (!*out_) throw std::runtime_error("cannot open send log " + path.string());
}

void SendLog::append(const SendLogEntry& e) {
  std::lock_guard lock(mu_);
  entries_.push_back(e);
  if (out_) *out_ << serialize(e) << '\n' << std::flush;
}

std::vector<SendLogEntry> SendLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t SendLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<SendLogEntry> SendLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read send log " + path.string());
  std::vector<SendLogEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_send_log_entry(line));
  }
  return out;
}

std::vector<std::string> device_names(Protocol p, int count) {
  std::vector<std::string> names;
  for (int i = 1; i <= count; ++i) names.push_back(std::string(to_string(p)) + "-" + std::to_string(i));
  return names;
}

namespace {

struct DeviceSchedule {
  Steady::time_point start;
  std::chrono::milliseconds interval;
  int sends;
};

template <typename SendFn>
void run_device(const std::string& name, Protocol protocol, const DeviceSchedule& sched, SendLog& log,
                SendFn&& send) {
  for (int k = 0; k < sched.sends; ++k) {
    std::this_thread::sleep_until(sched.start + k * sched.interval);
    const Timestamp now = Timestamp::now();
    SendOutcome outcome = SendOutcome::sent;
    try {
      send(device_payload(name, static_cast<std::uint64_t>(k), now));
    } catch (const std::exception& e) {
      outcome = SendOutcome::send_failed;
      log::warn("device {}: send {} failed: {}", name, k, e.what());
    }
    log.append({name, protocol, static_cast<std::uint64_t>(k), now, outcome});
  }
}

void run_mqtt_device(const std::string& name, const FleetConfig& cfg, const net::Endpoint& broker,
                     const DeviceSchedule& sched, SendLog& log) {
  std::unique_ptr<mqtt::Client> client;
  const std::string topic = "iot/" + name + "/data";
  run_device(name, Protocol::mqtt, sched, log, [&](const std::string& payload) {
    // Reconnect lazily so one broken connection costs one send, not the rest of the run.
    if (!client || !client->connected()) client = std::make_unique<mqtt::Client>(broker, name);
    client->publish(topic, payload, cfg.qos);
  });
  if (client) client->disconnect();
}

void run_coap_device(const std::string& name, const FleetEndpoints& endpoints, const DeviceSchedule& sched,
                     SendLog& log) {
  net::UdpSocket sock;
  run_device(name, Protocol::coap, sched, log, [&](const std::string& payload) {
    // Responses to earlier NON requests are not awaited; discard whatever queued up.
    while (sock.receive(std::chrono::milliseconds(0))) {
    }
    coap::Message req;
    req.type = coap::MessageType::non;
    req.code = coap::codes::post;
    req.message_id = coap::random_message_id();
    req.token = coap::random_token();
    req.set_uri_path(endpoints.ingest_path);
    req.add_option(coap::Option::uint(coap::options::content_format, coap::kContentFormatJson));
    req.payload.assign(payload.begin(), payload.end());
    sock.send_to(endpoints.coap_gateway, coap::encode_coap(req));
  });
}

void check_reachable(const FleetConfig& cfg, const FleetEndpoints& endpoints) {
  if (cfg.mqtt_devices > 0) {
    try {
      net::tcp_connect(endpoints.broker, std::chrono::milliseconds(1000));
    } catch (const net::NetError& e) {
      throw EndpointUnreachable("MQTT broker " + endpoints.broker.host + ":" +
                                std::to_string(endpoints.broker.port) + " unreachable: " + e.what());
    }
  }
  if (cfg.coap_devices > 0 && !coap::coap_ping(endpoints.coap_gateway)) {
    throw EndpointUnreachable("CoAP gateway " + endpoints.coap_gateway.host + ":" +
                              std::to_string(endpoints.coap_gateway.port) + " did not answer a ping");
  }
}

}  // namespace

void run_fleet(const FleetConfig& cfg, const FleetEndpoints& endpoints, SendLog& log) {
  validate(cfg);
  check_reachable(cfg, endpoints);

  const auto interval = std::chrono::milliseconds(cfg.interval_ms);
  std::mt19937_64 rng(std::random_device{}());
  std::uniform_int_distribution<int> offset_ms(0, cfg.interval_ms - 1);
  // Shared origin leaves room for connection setup before the first tick.
  const Steady::time_point origin = Steady::now() + std::chrono::milliseconds(200);
  auto schedule = [&] {
    const auto offset = cfg.aligned ? std::chrono::milliseconds(0) : std::chrono::milliseconds(offset_ms(rng));
    return DeviceSchedule{origin + offset, interval, cfg.sends_per_device()};
  };

  log::info("fleet starting: {} mqtt + {} coap devices, {} sends each", cfg.mqtt_devices, cfg.coap_devices,
            cfg.sends_per_device());
  auto guarded = [](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      log::error("device {} stopped: {}", name, e.what());
    }
  };
  std::vector<std::jthread> devices;
  for (const auto& name : device_names(Protocol::mqtt, cfg.mqtt_devices)) {
    devices.emplace_back([&, name, sched = schedule()] {
      guarded(name, [&] { run_mqtt_device(name, cfg, endpoints.broker, sched, log); });
    });
  }
  for (const auto& name : device_names(Protocol::coap, cfg.coap_devices)) {
    devices.emplace_back([&, name, sched = schedule()] {
      guarded(name, [&] { run_coap_device(name, endpoints, sched, log); });
    });
  }
}

}  // namespace hetbridge::sim
