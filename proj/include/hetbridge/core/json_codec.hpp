#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hetbridge/core/model.hpp"

namespace hetbridge {

class ModelError : public std::runtime_error {
 public:
  enum class Kind {
    malformed_json,
    missing_field,
    invalid_field,
    unexpected_field,
    invalid_timestamp,
    invalid_protocol,
  };

  ModelError(Kind kind, std::string field, const std::string& what)
      : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  /// Offending key, empty for malformed_json.
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

/// Strict parse of `{"device","protocol","message","origin_ts"}`; no other keys allowed.
IngestRecord parse_ingest_record(std::string_view text);
std::string serialize(const IngestRecord& r);

/// Keys: id, device, protocol, message, origin_ts, inserted_ts, sec_diff.
StoredReading parse_stored_reading(std::string_view text);
std::string serialize(const StoredReading& r);
/// JSON array of readings, the exact bytes every read path returns.
std::string serialize_array(const std::vector<StoredReading>& rows);

SendLogEntry parse_send_log_entry(std::string_view text);
std::string serialize(const SendLogEntry& e);

}  // namespace hetbridge
