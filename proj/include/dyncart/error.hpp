#pragma once

#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyncart {

// Bad user-supplied data or parameters. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based; 0 when the problem is not tied to a line
  std::string message;

  auto operator<=>(const Diagnostic&) const = default;
};

std::string format_diagnostic(const Diagnostic& d);

// Every invariant violation found while reading or assembling a dynamics
// log, sorted by line number.
class LogFormatError : public InputError {
 public:
  explicit LogFormatError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace dyncart
