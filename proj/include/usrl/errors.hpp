#pragma once

#include <stdexcept>
#include <string>

namespace usrl {

// Base for everything this library throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text (CoNLL documents). Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed but unusable data: misaligned corpora, missing cache keys,
// corrupt checkpoints, label inventory problems.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: bad RunConfig schema, unresolved freeze prefix,
// inconsistent embedder widths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shape disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-finite loss, gradient check over tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace usrl
