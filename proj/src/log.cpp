#include "ccopf/log.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_sinks.h>

namespace ccopf {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("ccopf", sink);
    lg->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("SYNC_CCOPF_LOG")) {
      level = spdlog::level::from_str(env);
    }
    lg->set_level(level);
    return lg;
  }();
  return *instance;
}

}  // namespace ccopf
