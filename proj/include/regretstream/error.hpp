#pragma once

#include <stdexcept>
#include <string>

namespace regretstream {

// Base for problems with caller-supplied data or configuration. The CLI maps
// these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public ValidationError {
 public:
  SchemaError(std::string field, const std::string& what)
      : ValidationError(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DuplicateIdError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An interface implementation broke its contract (tagger output length,
// unknown tag, misaligned inputs).
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// NTD/NUD and similar ratios whose denominator is zero.
class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Filesystem and stream failures. The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace regretstream
