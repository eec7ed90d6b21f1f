#pragma once

namespace recol {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace recol
