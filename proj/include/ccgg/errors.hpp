#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccgg {

// Bad caller input: malformed vectors, out-of-range classes, shape mismatches.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A mandatory dataset file is missing or unreadable.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset content violates the expected text format.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// A graph exceeds the configured maximum node count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Training cannot proceed (e.g. single-class data, missing frozen dependency).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient became NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccgg
