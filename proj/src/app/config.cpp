#include "hetbridge/app/config.hpp"

#include <charconv>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hetbridge::app {

using nlohmann::json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw InvalidConfig(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidConfig("unknown config key " + where + "." + key);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw InvalidConfig(std::string(key) + " must be a boolean");
      out = it->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw InvalidConfig(std::string(key) + " must be an integer");
      const auto v = it->get<std::int64_t>();
      if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) {
        throw InvalidConfig(std::string(key) + " out of range");
      }
      out = static_cast<T>(v);
    } else {
      if (!it->is_string()) throw InvalidConfig(std::string(key) + " must be a string");
      out = it->get<std::string>();
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string(key) + ": " + e.what());
  }
}

}  // namespace

AppConfig parse_config(std::string_view json_text, AppConfig cfg) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw InvalidConfig("config is not valid JSON");
  only_keys(j, "config", {"host", "ports", "fleet", "middleware", "log", "out"});

  read(j, "host", cfg.host);
  read(j, "log", cfg.log);
  if (j.contains("out")) {
    std::string out;
    read(j, "out", out);
    cfg.out = out;
  }
  if (auto it = j.find("ports"); it != j.end()) {
    only_keys(*it, "ports", {"mqtt", "http", "coap"});
    read(*it, "mqtt", cfg.ports.mqtt);
    read(*it, "http", cfg.ports.http);
    read(*it, "coap", cfg.ports.coap);
  }
  if (auto it = j.find("fleet"); it != j.end()) {
    only_keys(*it, "fleet", {"mqtt_devices", "coap_devices", "interval_ms", "duration_s", "qos", "aligned"});
    read(*it, "mqtt_devices", cfg.fleet.mqtt_devices);
    read(*it, "coap_devices", cfg.fleet.coap_devices);
    read(*it, "interval_ms", cfg.fleet.interval_ms);
    read(*it, "duration_s", cfg.fleet.duration_s);
    read(*it, "qos", cfg.fleet.qos);
    read(*it, "aligned", cfg.fleet.aligned);
  }
  if (auto it = j.find("middleware"); it != j.end()) {
    only_keys(*it, "middleware", {"token_ttl_s", "read_requires_auth"});
    std::int64_t ttl = cfg.token_ttl.count();
    read(*it, "token_ttl_s", ttl);
    if (ttl < 1) throw InvalidConfig("token_ttl_s must be >= 1");
    cfg.token_ttl = std::chrono::seconds(ttl);
    read(*it, "read_requires_auth", cfg.read_requires_auth);
  }
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path, AppConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

Ports ports_from_base(std::uint16_t base) {
  return {base, static_cast<std::uint16_t>(base + 1), static_cast<std::uint16_t>(base + 2)};
}

std::optional<std::uint16_t> env_base_port() {
  const char* raw = std::getenv("HETBRIDGE_BASE_PORT");
  if (!raw || !*raw) return std::nullopt;
  const std::string_view text(raw);
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 1 || v > 65533) {
    throw InvalidConfig("HETBRIDGE_BASE_PORT must be a port number in 1..65533");
  }
  return static_cast<std::uint16_t>(v);
}

}  // namespace hetbridge::app
