#include "hetbridge/middleware/service.hpp"

#include <charconv>

#include <nlohmann/json.hpp>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include "hetbridge/core/json_codec.hpp"
#include "hetbridge/core/log.hpp"

namespace hetbridge::middleware {

using nlohmann::json;

namespace {

constexpr std::int64_t kMaxWindowSeconds = 10LL * 365 * 24 * 3600;

ApiResponse error_response(int status, std::string_view error, std::string_view detail,
                           std::optional<std::string_view> reason = std::nullopt) {
  json body{{"error", error}, {"detail", detail}};
  if (reason) body["reason"] = *reason;
  return {status, body.dump()};
}

ApiResponse unauthorized(AuthFailure f) {
  return error_response(401, "unauthorized", "bearer token rejected", to_string(f));
}

// Thrown by the parameter parsers, mapped to 422.
struct InvalidParam {
  std::string name;
  std::string detail;
};

std::optional<std::int64_t> parse_int(std::string_view text) {
  std::int64_t v = 0;
  if (text.empty() || text.size() > 18) return std::nullopt;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

void reject_unknown(const QueryParams& q, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, _] : q) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw InvalidParam{k, "unknown query parameter"};
  }
}

std::optional<Protocol> protocol_param(const QueryParams& q) {
  auto it = q.find("protocol");
  if (it == q.end()) return std::nullopt;
  auto p = parse_protocol(it->second);
  if (!p) throw InvalidParam{"protocol", "must be mqtt or coap"};
  return p;
}

std::optional<Timestamp> timestamp_param(const QueryParams& q, const char* name) {
  auto it = q.find(name);
  if (it == q.end()) return std::nullopt;
  auto ts = Timestamp::parse(it->second);
  if (!ts) throw InvalidParam{name, "must be a canonical UTC timestamp"};
  return ts;
}

std::int64_t window_param(const QueryParams& q) {
  auto it = q.find("window_s");
  if (it == q.end()) throw InvalidParam{"window_s", "required"};
  auto v = parse_int(it->second);
  if (!v || *v < 1 || *v > kMaxWindowSeconds) throw InvalidParam{"window_s", "must be an integer >= 1"};
  return *v;
}

ReadingsFilter readings_filter(const QueryParams& q) {
  reject_unknown(q, {"protocol", "since", "until", "limit"});
  ReadingsFilter f;
  f.protocol = protocol_param(q);
  f.since = timestamp_param(q, "since");
  f.until = timestamp_param(q, "until");
  if (f.since && f.until && !(*f.since < *f.until)) throw InvalidParam{"since", "since must be before until"};
  f.limit = kDefaultLimit;
  if (auto it = q.find("limit"); it != q.end()) {
    auto v = parse_int(it->second);
    if (!v || *v < 1 || *v > static_cast<std::int64_t>(kMaxLimit)) {
      throw InvalidParam{"limit", "must be an integer in 1..10000"};
    }
    f.limit = static_cast<std::size_t>(*v);
  }
  return f;
}

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0x0F]);
  }
  return out;
}

bool is_token_text(std::string_view t) {
  if (t.size() != 32) return false;
  for (char c : t) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(AuthFailure f) noexcept {
  switch (f) {
    case AuthFailure::missing: return "missing";
    case AuthFailure::malformed: return "malformed";
    case AuthFailure::unknown: return "unknown";
    case AuthFailure::expired: return "expired";
  }
  return "unknown";
}

std::string hash_token(std::string_view token) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(token.data()), token.size(), digest);
  return to_hex(digest, sizeof digest);
}

std::string generate_token() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) throw std::runtime_error("RAND_bytes failed");
  return to_hex(bytes, sizeof bytes);
}

Service::Service(storage::ReadingStore& store, storage::PrincipalTable& principals, ServiceConfig config,
                 ClockFn clock)
    : store_(store), principals_(principals), config_(config), clock_(std::move(clock)) {}

const std::vector<Route>& Service::routes() {
  static const std::vector<Route> kRoutes = {
      {"POST", "/api/v1/devices"},
      {"POST", "/api/v1/readings"},
      {"GET", "/api/v1/readings"},
      {"GET", "/api/v1/stats/distribution"},
      {"GET", "/api/v1/stats/latency"},
      {"GET", "/api/v1/openapi.json"},
  };
  return kRoutes;
}

ApiResponse Service::handle(const Request& req) {
  const bool is_read = req.method == "GET" && req.path != "/api/v1/openapi.json";
  if (is_read && config_.read_requires_auth) {
    auto auth = authenticate(req.authorization);
    if (auto* f = std::get_if<AuthFailure>(&auth)) return unauthorized(*f);
  }

  if (req.method == "POST" && req.path == "/api/v1/devices") return register_principal(req.body);
  if (req.method == "POST" && req.path == "/api/v1/readings") {
    return post_reading(req.authorization, req.body, req.received_at);
  }
  if (req.method == "GET" && req.path == "/api/v1/readings") return get_readings(req.query);
  if (req.method == "GET" && req.path == "/api/v1/stats/distribution") return get_distribution(req.query);
  if (req.method == "GET" && req.path == "/api/v1/stats/latency") return get_latency_series(req.query);
  if (req.method == "GET" && req.path == "/api/v1/openapi.json") return openapi_document();
  return error_response(404, "not_found", "no such route");
}

ApiResponse Service::register_principal(std::string_view body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error_response(422, "validation", "body must be a JSON object");
  const auto name_it = j.find("name");
  if (name_it == j.end() || !name_it->is_string() || name_it->get<std::string>().empty()) {
    return error_response(422, "validation", "name must be a nonempty string");
  }
  const std::string name = name_it->get<std::string>();
  if (name.size() > kMaxDeviceIdLength) return error_response(422, "validation", "name longer than 64 characters");
  const auto kind_it = j.find("kind");
  const std::string kind = kind_it != j.end() && kind_it->is_string() ? kind_it->get<std::string>() : "";
  if (kind != "gateway" && !parse_protocol(kind)) {
    return error_response(422, "validation", "kind must be mqtt, coap or gateway");
  }

  const Timestamp issued = clock_();
  const Timestamp expires = issued + std::chrono::duration_cast<std::chrono::microseconds>(config_.token_ttl);
  const std::string token = generate_token();
  auto p = principals_.add(name, kind, hash_token(token), issued, expires);
  if (!p) return error_response(409, "duplicate_name", "name already has an unexpired registration");

  log::info("registered {} '{}' as principal {}", kind, name, p->principal_id);
  return {201, json{{"principal_id", p->principal_id},
                    {"name", p->name},
                    {"kind", p->kind},
                    {"token", token},
                    {"expires_at", p->expires_at.to_string()}}
                   .dump()};
}

std::variant<std::int64_t, AuthFailure> Service::authenticate(const std::optional<std::string>& header) const {
  if (!header || header->empty()) return AuthFailure::missing;
  constexpr std::string_view kScheme = "Bearer ";
  const std::string_view h = *header;
  if (h.size() <= kScheme.size() || h.substr(0, kScheme.size()) != kScheme) return AuthFailure::malformed;
  const std::string_view token = h.substr(kScheme.size());
  if (!is_token_text(token)) return AuthFailure::malformed;
  auto p = principals_.find_by_token_hash(hash_token(token));
  if (!p) return AuthFailure::unknown;
  if (!(clock_() < p->expires_at)) return AuthFailure::expired;
  return p->principal_id;
}

ApiResponse Service::post_reading(const std::optional<std::string>& authorization, std::string_view body,
                                  Timestamp received_at) {
  auto auth = authenticate(authorization);
  if (auto* f = std::get_if<AuthFailure>(&auth)) return unauthorized(*f);

  IngestRecord rec;
  try {
    rec = parse_ingest_record(body);
  } catch (const ModelError& e) {
    json err{{"error", "validation"}, {"detail", e.what()}};
    if (!e.field().empty()) err["field"] = e.field();
    return {422, err.dump()};
  }
  try {
    return {201, serialize(store_.insert(rec, received_at))};
  } catch (const storage::StorageUnavailable& e) {
    log::error("insert failed: {}", e.what());
    return error_response(503, "storage_unavailable", e.what());
  }
}

ApiResponse Service::get_readings(const QueryParams& query) const {
  try {
    return {200, serialize_array(store_.query(readings_filter(query)))};
  } catch (const InvalidParam& p) {
    return error_response(422, "validation", p.name + ": " + p.detail);
  }
}

ApiResponse Service::get_distribution(const QueryParams& query) const {
  std::int64_t window_s = 0;
  try {
    reject_unknown(query, {"window_s"});
    window_s = window_param(query);
  } catch (const InvalidParam& p) {
    return error_response(422, "validation", p.name + ": " + p.detail);
  }
  json body{{"mqtt", 0}, {"coap", 0}, {"window_s", window_s}, {"from_ts", nullptr}, {"to_ts", nullptr}};
  if (auto newest = store_.newest_inserted()) {
    const WindowRange w = window_ending_at(*newest, window_s);
    const ProtocolCounts c = store_.count_by_protocol(w.since, w.until);
    body["mqtt"] = c.mqtt;
    body["coap"] = c.coap;
    body["from_ts"] = w.since.to_string();
    body["to_ts"] = newest->to_string();
  }
  return {200, body.dump()};
}

ApiResponse Service::get_latency_series(const QueryParams& query) const {
  ReadingsFilter f;
  try {
    reject_unknown(query, {"window_s", "protocol"});
    const std::int64_t window_s = window_param(query);
    f.protocol = protocol_param(query);
    auto newest = store_.newest_inserted();
    if (!newest) return {200, "[]"};
    const WindowRange w = window_ending_at(*newest, window_s);
    f.since = w.since;
    f.until = w.until;
  } catch (const InvalidParam& p) {
    return error_response(422, "validation", p.name + ": " + p.detail);
  }
  std::vector<StoredReading> rows = store_.query(f);
  json arr = json::array();
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    arr.push_back({{"inserted_ts", it->inserted_ts.to_string()},
                   {"sec_diff", to_seconds(it->sec_diff)},
                   {"protocol", to_string(it->protocol)}});
  }
  return {200, arr.dump()};
}

}  // namespace hetbridge::middleware
