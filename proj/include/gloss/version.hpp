#pragma once

namespace gloss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gloss
