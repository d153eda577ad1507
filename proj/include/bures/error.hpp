#pragma once

#include <stdexcept>
#include <string>

namespace bures {

enum class ErrorKind {
  NonConvergence,
  NotSymmetric,
  NotPsd,
  SingularMatrix,
  DimensionMismatch,
  ExpNotAdmissible,
  InvalidArgument,
  InvalidSchedule,
  ScheduleExhausted,
  NotRegular,
  DegenerateFit,
  Parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ExpNotAdmissible: return "ExpNotAdmissible";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidSchedule: return "InvalidSchedule";
    case ErrorKind::ScheduleExhausted: return "ScheduleExhausted";
    case ErrorKind::NotRegular: return "NotRegular";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bures
