#pragma once

namespace catef {

inline constexpr const char* kVersion = "0.1.0";

} // namespace catef
