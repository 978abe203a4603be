#pragma once

namespace dirackit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dirackit
