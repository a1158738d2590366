#include "hetbridge/gateway/normalize.hpp"

#include <nlohmann/json.hpp>

namespace hetbridge::gateway {

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw NormalizeError(NormalizeError::Kind::malformed_payload, why);
}

IngestRecord parse_device_payload(std::string_view payload, Protocol protocol) {
  if (payload.empty()) malformed("empty payload");
  const auto j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) malformed("payload is not a JSON object");

  auto field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) malformed(std::string("payload needs string field ") + key);
    return it->get<std::string>();
  };

  IngestRecord r;
  r.device = field("device");
  if (!is_valid_device_id(r.device)) malformed("device id must match [a-z0-9-]{1,64}");
  auto ts = Timestamp::parse(field("timestamp"));
  if (!ts) malformed("timestamp is not a canonical UTC timestamp");
  r.origin_ts = *ts;
  r.message = field("message");
  r.protocol = protocol;
  return r;
}

}  // namespace

IngestRecord normalize_mqtt(std::string_view topic, std::string_view payload) {
  IngestRecord r = parse_device_payload(payload, Protocol::mqtt);
  // iot/<device>/data
  const auto first = topic.find('/');
  const auto second = first == std::string_view::npos ? first : topic.find('/', first + 1);
  if (second == std::string_view::npos) malformed("topic is not iot/<device>/data");
  const std::string_view topic_device = topic.substr(first + 1, second - first - 1);
  if (topic_device != r.device) {
    throw NormalizeError(NormalizeError::Kind::device_mismatch,
                         "topic device '" + std::string(topic_device) + "' != payload device '" + r.device + "'");
  }
  return r;
}

IngestRecord normalize_coap(std::string_view payload) { return parse_device_payload(payload, Protocol::coap); }

}  // namespace hetbridge::gateway
