#pragma once

#include <stdexcept>
#include <string>

namespace tcat {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Violated precondition that is not a shape problem (bad level, non-scalar root).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tcat
