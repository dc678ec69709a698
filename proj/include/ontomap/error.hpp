#pragma once

#include <stdexcept>
#include <string>

namespace ontomap {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (OBO, TSV, JSON). Carries a 1-based line number
// when one is known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally well-formed input that violates a model invariant
// (duplicate accession, dangling relationship endpoint, is_a cycle).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Incompatible or inconsistent data fed to an operation (mismatched
// ontology ids, mapping diffs across different matcher configs, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid CLI or pipeline configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ontomap
