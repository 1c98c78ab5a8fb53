#pragma once

namespace sife {

inline constexpr const char* kToolName = "staggered-ife";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace sife
