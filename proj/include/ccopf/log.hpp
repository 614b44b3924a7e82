#pragma once

#include <spdlog/spdlog.h>

namespace ccopf {

/// Shared stderr logger. Level comes from SYNC_CCOPF_LOG
/// (trace, debug, info, warn, error, off); default is warn.
spdlog::logger& log();

}  // namespace ccopf
