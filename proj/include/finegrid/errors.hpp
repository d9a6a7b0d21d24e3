#pragma once

#include <stdexcept>
#include <string>

namespace finegrid {

// Bad scenario/config input. The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant (overlapping footprints, unknown agent, ...).
// Aborts the run; the CLI maps this to exit code 2 and writes a dump.
struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace finegrid
