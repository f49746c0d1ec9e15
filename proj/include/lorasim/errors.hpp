#pragma once

#include <stdexcept>
#include <string>

namespace lorasim {

// Structural problem in a config, schedule or topology.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (schedule JSON, trace JSON-lines, rxpk logs).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

}  // namespace lorasim
