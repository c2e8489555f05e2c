#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace neb {

// Raised when input data (CSV, config) cannot be interpreted.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A command line or configuration value is missing, unknown or out of range.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The constraint set of a fit admits no feasible point. Carries the labels of
// the rows implicated by the infeasibility certificate.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::string> rows)
      : std::runtime_error(what), rows_(std::move(rows)) {}
  const std::vector<std::string>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::string> rows_;
};

}  // namespace neb
