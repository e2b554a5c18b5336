#pragma once

#include <stdexcept>
#include <string>

namespace qcfd {

// Invalid argument values, shapes, or domain violations caught before any
// computation runs.
class ParamError : public std::invalid_argument {
 public:
  explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed input files, inconsistent datasets, I/O failures. Maps to CLI
// exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered mid-computation; training aborts. Maps to
// CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qcfd
