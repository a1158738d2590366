#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>

#include "hetbridge/analysis/analysis.hpp"
#include "hetbridge/app/config.hpp"
#include "hetbridge/app/demo.hpp"
#include "hetbridge/core/log.hpp"
#include "hetbridge/gateway/gateways.hpp"
#include "hetbridge/middleware/http_server.hpp"
#include "hetbridge/mqtt/broker.hpp"
#include "hetbridge/sim/fleet.hpp"
#include "hetbridge/storage/principals.hpp"
#include "hetbridge/storage/store.hpp"

using namespace hetbridge;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<int> mqtt;
  std::optional<int> coap;
  std::optional<int> interval_ms;
  std::optional<int> duration_s;
  std::optional<int> qos;
  bool aligned = false;
  std::string out;
  std::string log;
  std::string middleware;
  std::string gateway_kind;
  std::string run_dir;
};

// Defaults, then HETBRIDGE_BASE_PORT, then the config file, then flags.
app::AppConfig resolve(const Flags& f) {
  app::AppConfig cfg;
  if (auto base = app::env_base_port()) cfg.ports = app::ports_from_base(*base);
  if (!f.config.empty()) cfg = app::load_config(f.config, cfg);
  if (f.mqtt) cfg.fleet.mqtt_devices = *f.mqtt;
  if (f.coap) cfg.fleet.coap_devices = *f.coap;
  if (f.interval_ms) cfg.fleet.interval_ms = *f.interval_ms;
  if (f.duration_s) cfg.fleet.duration_s = *f.duration_s;
  if (f.qos) cfg.fleet.qos = *f.qos;
  if (f.aligned) cfg.fleet.aligned = true;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.log.empty()) cfg.log = f.log;
  auto format = log::parse_format(cfg.log);
  if (!format) throw UsageError("--log must be text or ndjson");
  log::init(*format);
  return cfg;
}

std::string middleware_url(const Flags& f, const app::AppConfig& cfg) {
  if (!f.middleware.empty()) return f.middleware;
  return "http://" + cfg.host + ":" + std::to_string(cfg.ports.http);
}

sigset_t shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

void wait_for_shutdown() {
  const sigset_t set = shutdown_signals();
  int sig = 0;
  sigwait(&set, &sig);
  log::info("received signal {}, shutting down", sig);
}

int cmd_broker(const app::AppConfig& cfg) {
  mqtt::BrokerServer broker({cfg.host, cfg.ports.mqtt});
  broker.start();
  log::info("mqtt broker listening on {}:{}", cfg.host, broker.port());
  wait_for_shutdown();
  broker.stop();
  return kOk;
}

int cmd_middleware(const app::AppConfig& cfg) {
  std::unique_ptr<storage::ReadingStore> store;
  if (cfg.out) {
    std::filesystem::create_directories(*cfg.out);
    const auto wal = *cfg.out / app::kReadingsFile;
    if (std::filesystem::exists(wal)) {
      storage::RecoveryReport rep;
      store = storage::ReadingStore::recover(wal, &rep);
      log::info("recovered {} readings from {}", rep.rows, wal.string());
    } else {
      store = std::make_unique<storage::ReadingStore>(wal);
    }
  } else {
    store = std::make_unique<storage::ReadingStore>();
  }
  storage::PrincipalTable principals;
  middleware::Service service(*store, principals, {cfg.token_ttl, cfg.read_requires_auth});
  middleware::HttpServer http(service, {cfg.host, cfg.ports.http});
  http.start();
  log::info("middleware listening on http://{}:{}", cfg.host, http.port());
  wait_for_shutdown();
  http.stop();
  return kOk;
}

int cmd_gateway(const Flags& f, const app::AppConfig& cfg) {
  if (f.gateway_kind == "mqtt") {
    gateway::MqttGatewayConfig gc;
    gc.middleware_base_url = middleware_url(f, cfg);
    gc.broker = {cfg.host, cfg.ports.mqtt};
    gateway::MqttGateway gw(gc);
    gw.start();
    wait_for_shutdown();
    gw.stop();
  } else {
    gateway::CoapGatewayConfig gc;
    gc.middleware_base_url = middleware_url(f, cfg);
    gc.bind = {cfg.host, cfg.ports.coap};
    gateway::CoapGateway gw(gc);
    gw.start();
    log::info("coap gateway listening on {}:{}", cfg.host, gw.port());
    wait_for_shutdown();
    gw.stop();
  }
  return kOk;
}

int cmd_simulate(const app::AppConfig& cfg) {
  validate(cfg.fleet);
  const std::filesystem::path dir = cfg.out.value_or(std::filesystem::current_path());
  std::filesystem::create_directories(dir);
  sim::SendLog log_out(dir / app::kSendLogFile);
  sim::run_fleet(cfg.fleet, {{cfg.host, cfg.ports.mqtt}, {cfg.host, cfg.ports.coap}}, log_out);
  std::cout << (dir / app::kSendLogFile).string() << "\n";
  return kOk;
}

int cmd_analyze(const std::string& run_dir) {
  const auto outputs = app::analyze_run_dir(run_dir);
  for (const auto& p : outputs.files) std::cout << p.string() << "\n";
  std::cout << analysis::to_json(outputs.loss);
  return kOk;
}

int cmd_demo(const app::AppConfig& cfg) {
  app::DemoOptions opts;
  opts.fleet = cfg.fleet;
  opts.out = cfg.out;
  // Hermetic by default: fixed ports only when HETBRIDGE_BASE_PORT asks for them.
  if (app::env_base_port()) opts.ports = cfg.ports;
  const auto report = app::run_demo(opts);
  app::print_summary(std::cout, report);
  return report.passed() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  // Block shutdown signals before any thread starts so sigwait sees them.
  const sigset_t signals = shutdown_signals();
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  CLI::App cli{"hetbridge: MQTT/CoAP to REST bridge and measurement harness"};
  cli.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--log", f.log, "log format: text or ndjson");
  };
  auto fleet_flags = [&](CLI::App* sub) {
    sub->add_option("--mqtt", f.mqtt, "number of MQTT devices");
    sub->add_option("--coap", f.coap, "number of CoAP devices");
    sub->add_option("--interval-ms", f.interval_ms, "send interval per device");
    sub->add_option("--duration-s", f.duration_s, "run duration");
    sub->add_option("--qos", f.qos, "MQTT publish qos (0 or 1)");
    sub->add_flag("--aligned", f.aligned, "start every device at the same instant");
    sub->add_option("--out", f.out, "run directory");
  };

  auto* broker = cli.add_subcommand("broker", "run the MQTT broker");
  common(broker);
  auto* middleware = cli.add_subcommand("middleware", "run the REST middleware");
  common(middleware);
  middleware->add_option("--out", f.out, "directory for the readings log");
  auto* gw = cli.add_subcommand("gateway", "run a protocol gateway");
  common(gw);
  gw->add_option("kind", f.gateway_kind, "mqtt or coap")->required()->check(CLI::IsMember({"mqtt", "coap"}));
  gw->add_option("--middleware", f.middleware, "middleware base URL");
  auto* simulate = cli.add_subcommand("simulate", "run the device fleet against running servers");
  common(simulate);
  fleet_flags(simulate);
  auto* analyze = cli.add_subcommand("analyze", "write CSV/SVG/loss outputs for a run directory");
  common(analyze);
  analyze->add_option("run-dir", f.run_dir, "run directory")->required();
  auto* demo = cli.add_subcommand("demo", "run the full experiment in-process and check thresholds");
  common(demo);
  fleet_flags(demo);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return cli.exit(e);
    cli.exit(e, std::cerr, std::cerr);
    return kUsage;
  }

  try {
    const app::AppConfig cfg = resolve(f);
    if (*broker) return cmd_broker(cfg);
    if (*middleware) return cmd_middleware(cfg);
    if (*gw) return cmd_gateway(f, cfg);
    if (*simulate) return cmd_simulate(cfg);
    if (*analyze) return cmd_analyze(f.run_dir);
    if (*demo) return cmd_demo(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << cli.get_subcommands().front()->help();
    return kUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n\n" << cli.get_subcommands().front()->help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
