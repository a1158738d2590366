#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include <spdlog/spdlog.h>

namespace hetbridge::log {

enum class Format { text, ndjson };

/// Installs the process-wide stderr logger. Safe to call more than once.
void init(Format format = Format::text, spdlog::level::level_enum level = spdlog::level::info);

std::optional<Format> parse_format(std::string_view name);

/// Shared logger; init() is applied lazily with defaults.
std::shared_ptr<spdlog::logger> get();

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->info(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->warn(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->error(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->debug(fmt, std::forward<Args>(args)...);
}

}  // namespace hetbridge::log
