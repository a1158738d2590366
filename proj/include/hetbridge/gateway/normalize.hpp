#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "hetbridge/core/model.hpp"

namespace hetbridge::gateway {

class NormalizeError : public std::runtime_error {
 public:
  enum class Kind { malformed_payload, device_mismatch };
  NormalizeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Device payload `{"device","timestamp","message"}` from topic `iot/<device>/data`.
/// The topic's device level must equal the payload's device.
IngestRecord normalize_mqtt(std::string_view topic, std::string_view payload);

/// Same payload schema, body of a CoAP POST to the ingest resource.
IngestRecord normalize_coap(std::string_view payload);

}  // namespace hetbridge::gateway
