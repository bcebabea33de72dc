#pragma once

namespace qgmm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qgmm
