#pragma once

#include <stdexcept>
#include <string>

namespace scriptorium {

// Bad user-supplied configuration (flags, ranges, missing directories).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent data encountered while processing.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scriptorium
