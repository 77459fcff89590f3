#pragma once

#include <stdexcept>
#include <string>

namespace bundle_newton {

enum class ErrorKind {
  DegenerateUpdate,
  SingularSystem,
  SingularConstraint,
  ZeroStep,
  PoleSingularity,
  DimensionMismatch,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Base class of every error raised by the library. The kind lets callers
/// branch without a cascade of catch clauses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateUpdate: return "DegenerateUpdate";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::SingularConstraint: return "SingularConstraint";
    case ErrorKind::ZeroStep: return "ZeroStep";
    case ErrorKind::PoleSingularity: return "PoleSingularity";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace bundle_newton
