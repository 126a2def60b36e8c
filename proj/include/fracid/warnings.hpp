#pragma once

#include <atomic>
#include <iostream>
#include <string>

namespace fracid {

// Non-fatal diagnostics (leaving the admissible interval, divergent noise
// trace at the current s, ...) go to stderr unless silenced (--quiet).
inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

inline void warn(const std::string& message) {
  if (warnings_enabled().load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << message << "\n";
  }
}

}  // namespace fracid
