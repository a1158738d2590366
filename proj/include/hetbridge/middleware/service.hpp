#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hetbridge/core/model.hpp"
#include "hetbridge/storage/principals.hpp"
#include "hetbridge/storage/store.hpp"

namespace hetbridge::middleware {

struct ServiceConfig {
  std::chrono::seconds token_ttl{24 * 3600};
  /// Read endpoints are open unless this is set.
  bool read_requires_auth = false;
};

using QueryParams = std::map<std::string, std::string>;

struct Request {
  std::string method;
  std::string path;
  std::optional<std::string> authorization;
  QueryParams query;
  std::string body;
  /// Server clock at handler entry.
  Timestamp received_at;
};

/// JSON body plus HTTP status.
struct ApiResponse {
  int status = 200;
  std::string body;
};

struct Route {
  std::string method;
  std::string path;
  auto operator<=>(const Route&) const = default;
};

enum class AuthFailure { missing, malformed, unknown, expired };
std::string_view to_string(AuthFailure f) noexcept;

inline constexpr std::size_t kDefaultLimit = 100;
inline constexpr std::size_t kMaxLimit = 10000;

/// REST middleware logic, independent of the HTTP library.
///
/// Status vocabulary: 201 create, 200 read, 401 auth, 404 unknown route,
/// 409 conflict, 422 validation, 503 storage unavailable.
class Service {
 public:
  using ClockFn = std::function<Timestamp()>;

  Service(storage::ReadingStore& store, storage::PrincipalTable& principals, ServiceConfig config = {},
          ClockFn clock = &Timestamp::now);

  /// Every route the service implements; the HTTP front end registers exactly these.
  static const std::vector<Route>& routes();

  ApiResponse handle(const Request& req);

  ApiResponse register_principal(std::string_view body);
  std::variant<std::int64_t, AuthFailure> authenticate(const std::optional<std::string>& header) const;
  ApiResponse post_reading(const std::optional<std::string>& authorization, std::string_view body,
                           Timestamp received_at);
  ApiResponse get_readings(const QueryParams& query) const;
  ApiResponse get_distribution(const QueryParams& query) const;
  ApiResponse get_latency_series(const QueryParams& query) const;
  static ApiResponse openapi_document();

 private:
  storage::ReadingStore& store_;
  storage::PrincipalTable& principals_;
  ServiceConfig config_;
  ClockFn clock_;
};

/// Hex SHA-256 of the token text.
std::string hash_token(std::string_view token);
/// 128 random bits as 32 lowercase hex characters.
std::string generate_token();

}  // namespace hetbridge::middleware
