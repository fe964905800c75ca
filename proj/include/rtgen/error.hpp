#pragma once

#include <stdexcept>
#include <string>

namespace rtgen {

// Bad inputs: scenario documents, latency CSVs, unsupported lookups, CLI flags.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariant. The CLI maps this to exit code 3.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace rtgen
