#pragma once

#include <string_view>

namespace fploc {

inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace fploc
