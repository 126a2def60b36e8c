#pragma once

namespace fracid {

inline constexpr const char* kVersion = "0.1.0";

// Generator identity recorded in output metadata so runs can be reproduced.
inline constexpr const char* kRngName = "mt19937_64";

}  // namespace fracid
