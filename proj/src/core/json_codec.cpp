#include "hetbridge/core/json_codec.hpp"

#include <nlohmann/json.hpp>

namespace hetbridge {

using nlohmann::json;

namespace {

json parse_object(std::string_view text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ModelError(ModelError::Kind::malformed_json, "", "body is not a JSON object");
  }
  return j;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ModelError(ModelError::Kind::missing_field, key, std::string("missing field: ") + key);
  }
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) {
    throw ModelError(ModelError::Kind::invalid_field, key, std::string(key) + " must be a string");
  }
  return v.get<std::string>();
}

Timestamp require_timestamp(const json& j, const char* key) {
  auto ts = Timestamp::parse(require_string(j, key));
  if (!ts) {
    throw ModelError(ModelError::Kind::invalid_timestamp, key,
                     std::string(key) + " is not a canonical UTC timestamp");
  }
  return *ts;
}

Protocol require_protocol(const json& j) {
  auto p = parse_protocol(require_string(j, "protocol"));
  if (!p) throw ModelError(ModelError::Kind::invalid_protocol, "protocol", "protocol must be mqtt or coap");
  return *p;
}

std::string require_device(const json& j) {
  std::string device = require_string(j, "device");
  if (!is_valid_device_id(device)) {
    throw ModelError(ModelError::Kind::invalid_field, "device", "device id must match [a-z0-9-]{1,64}");
  }
  return device;
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ModelError(ModelError::Kind::unexpected_field, key, "unexpected field: " + key);
  }
}

json to_json(const StoredReading& r) {
  return json{{"id", r.id},
              {"device", r.device},
              {"protocol", to_string(r.protocol)},
              {"message", r.message},
              {"origin_ts", r.origin_ts.to_string()},
              {"inserted_ts", r.inserted_ts.to_string()},
              {"sec_diff", to_seconds(r.sec_diff)}};
}

}  // namespace

IngestRecord parse_ingest_record(std::string_view text) {
  const json j = parse_object(text);
  IngestRecord r;
  r.device = require_device(j);
  r.protocol = require_protocol(j);
  r.message = require_string(j, "message");
  r.origin_ts = require_timestamp(j, "origin_ts");
  reject_unknown_keys(j, {"device", "protocol", "message", "origin_ts"});
  return r;
}

std::string serialize(const IngestRecord& r) {
  return json{{"device", r.device},
              {"protocol", to_string(r.protocol)},
              {"message", r.message},
              {"origin_ts", r.origin_ts.to_string()}}
      .dump();
}

StoredReading parse_stored_reading(std::string_view text) {
  const json j = parse_object(text);
  StoredReading r;
  const json& id = require(j, "id");
  if (!id.is_number_integer() || id.get<std::int64_t>() <= 0) {
    throw ModelError(ModelError::Kind::invalid_field, "id", "id must be a positive integer");
  }
  r.id = id.get<std::int64_t>();
  r.device = require_device(j);
  r.protocol = require_protocol(j);
  r.message = require_string(j, "message");
  r.origin_ts = require_timestamp(j, "origin_ts");
  r.inserted_ts = require_timestamp(j, "inserted_ts");
  const json& diff = require(j, "sec_diff");
  if (!diff.is_number()) {
    throw ModelError(ModelError::Kind::invalid_field, "sec_diff", "sec_diff must be a number");
  }
  r.sec_diff = from_seconds(diff.get<double>());
  return r;
}

std::string serialize(const StoredReading& r) { return to_json(r).dump(); }

std::string serialize_array(const std::vector<StoredReading>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  return arr.dump();
}

SendLogEntry parse_send_log_entry(std::string_view text) {
  const json j = parse_object(text);
  SendLogEntry e;
  e.device = require_device(j);
  e.protocol = require_protocol(j);
  const json& seq = require(j, "seq");
  if (!seq.is_number_unsigned()) {
    throw ModelError(ModelError::Kind::invalid_field, "seq", "seq must be a nonnegative integer");
  }
  e.seq = seq.get<std::uint64_t>();
  e.origin_ts = require_timestamp(j, "origin_ts");
  const std::string outcome = require_string(j, "outcome");
  if (outcome == "sent") {
    e.outcome = SendOutcome::sent;
  } else if (outcome == "send_failed") {
    e.outcome = SendOutcome::send_failed;
  } else {
    throw ModelError(ModelError::Kind::invalid_field, "outcome", "outcome must be sent or send_failed");
  }
  return e;
}

std::string serialize(const SendLogEntry& e) {
  return json{{"device", e.device},
              {"protocol", to_string(e.protocol)},
              {"seq", e.seq},
              {"origin_ts", e.origin_ts.to_string()},
              {"outcome", e.outcome == SendOutcome::sent ? "sent" : "send_failed"}}
      .dump();
}

}  // namespace hetbridge
