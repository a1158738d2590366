#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "hetbridge/core/model.hpp"

namespace hetbridge::storage {

/// Device/gateway table: one row per registration. Only a hash of the token is kept.
struct Principal {
  std::int64_t principal_id = 0;
  std::string name;
  /// "mqtt", "coap" or "gateway".
  std::string kind;
  std::string token_hash;
  Timestamp issued_at;
  Timestamp expires_at;
};

class PrincipalTable {
 public:
  /// Returns nullopt if `name` has a registration still valid at `issued_at`.
  std::optional<Principal> add(const std::string& name, const std::string& kind, const std::string& token_hash,
                               Timestamp issued_at, Timestamp expires_at);
  std::optional<Principal> find_by_token_hash(const std::string& token_hash) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::int64_t, Principal> by_id_;
  std::map<std::string, std::int64_t> by_name_;
  std::map<std::string, std::int64_t> by_token_hash_;
  std::int64_t next_id_ = 1;
};

}  // namespace hetbridge::storage
