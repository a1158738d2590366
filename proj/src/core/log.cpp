#include "hetbridge/core/log.hpp"

#include <mutex>

#include <nlohmann/json.hpp>
#include <spdlog/formatter.h>
#include <spdlog/sinks/stdout_sinks.h>

#include "hetbridge/core/model.hpp"

namespace hetbridge::log {

namespace {

// One JSON object per line: {"ts":...,"level":...,"logger":...,"msg":...}
class NdjsonFormatter final : public spdlog::formatter {
 public:
  void format(const spdlog::details::log_msg& msg, spdlog::memory_buf_t& dest) override {
    const auto us = std::chrono::time_point_cast<std::chrono::microseconds>(msg.time);
    nlohmann::json line{
        {"ts", Timestamp(us).to_string()},
        {"level", std::string(spdlog::level::to_string_view(msg.level).data(),
                              spdlog::level::to_string_view(msg.level).size())},
        {"logger", std::string(msg.logger_name.data(), msg.logger_name.size())},
        {"msg", std::string(msg.payload.data(), msg.payload.size())},
    };
    const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    dest.append(text.data(), text.data() + text.size());
    dest.push_back('\n');
  }

  std::unique_ptr<spdlog::formatter> clone() const override {
    return std::make_unique<NdjsonFormatter>();
  }
};

std::mutex g_mu;
std::shared_ptr<spdlog::logger> g_logger;

std::shared_ptr<spdlog::logger> make_logger(Format format, spdlog::level::level_enum level) {
  auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
  auto logger = std::make_shared<spdlog::logger>("hetbridge", sink);
  if (format == Format::ndjson) {
    logger->set_formatter(std::make_unique<NdjsonFormatter>());
  } else {
    logger->set_pattern("%Y-%m-%dT%H:%M:%S.%fZ %^%-5l%$ %v", spdlog::pattern_time_type::utc);
  }
  logger->set_level(level);
  logger->flush_on(spdlog::level::warn);
  return logger;
}

}  // namespace

void init(Format format, spdlog::level::level_enum level) {
  std::lock_guard lock(g_mu);
  g_logger = make_logger(format, level);
}

std::optional<Format> parse_format(std::string_view name) {
  if (name == "text") return Format::text;
  if (name == "ndjson") return Format::ndjson;
  return std::nullopt;
}

std::shared_ptr<spdlog::logger> get() {
  std::lock_guard lock(g_mu);
  if (!g_logger) g_logger = make_logger(Format::text, spdlog::level::info);
  return g_logger;
}

}  // namespace hetbridge::log
