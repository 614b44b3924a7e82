#pragma once

#include <string>

#include "json.hpp"

namespace ccopf::detail {

/// Pretty JSON whose reals carry 12 significant digits.
std::string dump_json(const nlohmann::ordered_json& doc);

}  // namespace ccopf::detail
