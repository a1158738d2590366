#pragma once

#include <stdexcept>
#include <string_view>

namespace hetbridge::mqtt {

class InvalidFilter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wildcards must occupy a whole level; "#" only as the last level.
bool is_valid_filter(std::string_view filter) noexcept;
/// Topic names are nonempty and carry no wildcards.
bool is_valid_topic(std::string_view topic) noexcept;

/// Level-wise match on "/" separators. Throws InvalidFilter.
bool topic_matches(std::string_view filter, std::string_view topic);

}  // namespace hetbridge::mqtt
