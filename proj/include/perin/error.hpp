#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace perin {

// Malformed input data (bad JSON, schema violations, inconsistent traces).
// The CLI maps these to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON syntax error at a known byte offset of the offending line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : DataError(what + " at byte " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A required field is missing or has the wrong type.
class SchemaError : public DataError {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : DataError("field '" + field + "': " + what), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// No solution exists (e.g. a node without any applicable rule).
// The CLI maps these to exit status 3.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or usage. The CLI maps these to exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace perin
