#include "exhaz/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace exhaz {

void init_logging() {
  auto logger = spdlog::get("exhaz");
  if (!logger) logger = spdlog::stderr_color_mt("exhaz");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("EXHAZ_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace exhaz
