#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace warprnn {

// Invalid configuration / precondition violation (bad dimensions, bad flag
// combinations, out-of-range arguments). Mapped to exit code 1 by the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime (non-finite gradient or loss). Mapped to exit
// code 2 by the CLI.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_numeric(bool ok, const std::string& msg) {
  if (!ok) throw NumericError(msg);
}

}  // namespace warprnn
