#pragma once

namespace home {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace home
