#pragma once

#include <stdexcept>
#include <string>

namespace mesa {

// Category of a failure; the CLI maps these onto process exit codes.
enum class ErrorKind { config = 1, data = 2, numerical = 3 };

enum class DataErrc {
  missing_file,
  empty_file,
  malformed_row,
  non_numeric,
  non_finite,
  label_domain,
  single_class,
  unknown_column,
  class_too_small,
  empty_class,
  dimension_mismatch,
  invalid_argument,
};

inline const char* to_string(DataErrc code) {
  switch (code) {
    case DataErrc::missing_file: return "missing_file";
    case DataErrc::empty_file: return "empty_file";
    case DataErrc::malformed_row: return "malformed_row";
    case DataErrc::non_numeric: return "non_numeric";
    case DataErrc::non_finite: return "non_finite";
    case DataErrc::label_domain: return "label_domain";
    case DataErrc::single_class: return "single_class";
    case DataErrc::unknown_column: return "unknown_column";
    case DataErrc::class_too_small: return "class_too_small";
    case DataErrc::empty_class: return "empty_class";
    case DataErrc::dimension_mismatch: return "dimension_mismatch";
    case DataErrc::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  DataError(DataErrc code, const std::string& what)
      : Error(ErrorKind::data, std::string(to_string(code)) + ": " + what), code_(code) {}
  DataErrc code() const noexcept { return code_; }

 private:
  DataErrc code_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace mesa
