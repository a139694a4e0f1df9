#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tif {

/// Invalid GeneratorSpec or other inconsistent input description.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset, config or checkpoint file. line() is 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid or contradictory training/evaluation configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset and model disagree (dimension, schema).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or parameter during training.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace tif
