#pragma once

#include <stdexcept>
#include <string>

namespace clusterdyn {

enum class ErrorKind {
  NonStochastic,
  NegativeProbability,
  InvalidArgument,
  EmptyCoarseLevel,
  Overflow,
  IncompatibleComposition,
  SizeMismatch,
  ZeroMassLevel,
  InfeasibleTarget,
  BudgetExceeded,
  LimitExceeded,
  EmptyData,
  PositivityViolated,
  InsufficientBurnIn,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonStochastic: return "NonStochastic";
    case ErrorKind::NegativeProbability: return "NegativeProbability";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyCoarseLevel: return "EmptyCoarseLevel";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::IncompatibleComposition: return "IncompatibleComposition";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::ZeroMassLevel: return "ZeroMassLevel";
    case ErrorKind::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::LimitExceeded: return "LimitExceeded";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::PositivityViolated: return "PositivityViolated";
    case ErrorKind::InsufficientBurnIn: return "InsufficientBurnIn";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace clusterdyn
