#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdloc {

// Base class for every error raised by the library. Callers that only care
// about "the input was bad" versus "something is broken" can catch this and
// the std::logic_error family separately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line, std::string field)
      : Error(format(message, line, field)),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            const std::string& field) {
    std::string out = "parse error";
    if (line > 0) out += " at line " + std::to_string(line);
    if (!field.empty()) out += " (field '" + field + "')";
    return out + ": " + message;
  }

  std::size_t line_;
  std::string field_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message,
                           std::vector<std::size_t> offending = {})
      : Error(message + describe(offending)), offending_(std::move(offending)) {}

  const std::vector<std::size_t>& offending() const noexcept {
    return offending_;
  }

 private:
  static std::string describe(const std::vector<std::size_t>& idx) {
    if (idx.empty()) return {};
    std::string out = " (indices:";
    for (std::size_t i = 0; i < idx.size() && i < 32; ++i)
      out += " " + std::to_string(idx[i]);
    if (idx.size() > 32) out += " ...";
    return out + ")";
  }

  std::vector<std::size_t> offending_;
};

// Non-finite values or diverging iterations.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace crowdloc
