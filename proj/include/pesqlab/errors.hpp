#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pesqlab {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (mainly the CLI) can pick an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsupported container/encoding; names the offending header field.
class FormatError : public Error {
 public:
  FormatError(const std::string& field, const std::string& detail)
      : Error("unsupported " + field + ": " + detail), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Truncated or malformed byte stream.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t byte_offset)
      : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Level estimate of zero: the signal cannot be normalized.
class DegenerateLevelError : public Error {
 public:
  using Error::Error;
};

// Non-finite intermediate inside a numeric pipeline; carries the stage.
class NumericError : public Error {
 public:
  NumericError(const std::string& stage, const std::string& detail)
      : Error("non-finite value in stage '" + stage + "': " + detail), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace pesqlab
