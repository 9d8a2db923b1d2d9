#pragma once

namespace pulserec {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pulserec
