#include "hetbridge/mqtt/topic.hpp"

#include <string>

namespace hetbridge::mqtt {

namespace {

// Splits off the next level; returns false once `rest` is exhausted.
bool next_level(std::string_view& rest, bool& more, std::string_view& level) {
  if (!more) return false;
  const auto pos = rest.find('/');
  if (pos == std::string_view::npos) {
    level = rest;
    more = false;
  } else {
    level = rest.substr(0, pos);
    rest.remove_prefix(pos + 1);
  }
  return true;
}

}  // namespace

bool is_valid_filter(std::string_view filter) noexcept {
  if (filter.empty() || filter.size() > 0xFFFF) return false;
  std::string_view rest = filter;
  bool more = true;
  std::string_view level;
  while (next_level(rest, more, level)) {
    if (level.find('\0') != std::string_view::npos) return false;
    if (level == "#") {
      if (more) return false;
      continue;
    }
    if (level == "+") continue;
    if (level.find_first_of("+#") != std::string_view::npos) return false;
  }
  return true;
}

bool is_valid_topic(std::string_view topic) noexcept {
  return !topic.empty() && topic.size() <= 0xFFFF &&
         topic.find_first_of(std::string_view("+#\0", 3)) == std::string_view::npos;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  if (!is_valid_filter(filter)) throw InvalidFilter("invalid topic filter: " + std::string(filter));

  // "$SYS"-style topics are never matched by a leading wildcard.
  if (!topic.empty() && topic.front() == '$' && (filter.front() == '+' || filter.front() == '#')) return false;

  std::string_view frest = filter, trest = topic;
  bool fmore = true, tmore = true;
  std::string_view flevel, tlevel;
  for (;;) {
    const bool has_f = next_level(frest, fmore, flevel);
    if (has_f && flevel == "#") return true;
    const bool has_t = next_level(trest, tmore, tlevel);
    if (!has_f || !has_t) return has_f == has_t;
    if (flevel != "+" && flevel != tlevel) return false;
  }
}

}  // namespace hetbridge::mqtt
