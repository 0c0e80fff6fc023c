#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fleetmig {

// Failure class, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
  config,     // exit 2
  data,       // exit 3
  numerical,  // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

inline Error config_error(std::string module, const std::string& message) {
  return Error(ErrorKind::config, std::move(module), message);
}

inline Error data_error(std::string module, const std::string& message) {
  return Error(ErrorKind::data, std::move(module), message);
}

inline Error numerical_error(std::string module, const std::string& message) {
  return Error(ErrorKind::numerical, std::move(module), message);
}

/// Design matrix is not of full column rank; `dependent` names the columns
/// that fall below the pivot threshold.
class RankDeficientError : public Error {
 public:
  RankDeficientError(std::string module, std::vector<std::string> dependent)
      : Error(ErrorKind::numerical, std::move(module), describe(dependent)),
        dependent_(std::move(dependent)) {}

  const std::vector<std::string>& dependent() const noexcept { return dependent_; }

 private:
  static std::string describe(const std::vector<std::string>& cols) {
    std::string msg = "rank-deficient design; dependent columns:";
    std::size_t shown = 0;
    for (const auto& c : cols) {
      if (shown++ == 20) {
        msg += " ... (" + std::to_string(cols.size()) + " total)";
        break;
      }
      msg += " " + c;
    }
    return msg;
  }

  std::vector<std::string> dependent_;
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::data:
      return 3;
    case ErrorKind::numerical:
      return 4;
  }
  return 1;
}

}  // namespace fleetmig
