#pragma once

#include <stdexcept>
#include <string>

namespace vcrn {

/// Broad failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  kDimension = 2,
  kNumeric = 3,
  kConfig = 4,
  kParse = 5,
  kIo = 6,
  kContract = 7,
  kTraining = 8,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kTraining: return "training error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::kDimension, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::kContract, w) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error(ErrorKind::kTraining, w) {}
};

/// Binary file parse failures carry a finer reason so callers can tell a
/// foreign file from a damaged one.
class ParseError : public Error {
 public:
  enum class Reason { kBadMagic, kVersion, kTruncated, kMalformed };
  ParseError(Reason reason, const std::string& w)
      : Error(ErrorKind::kParse, w), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace vcrn
