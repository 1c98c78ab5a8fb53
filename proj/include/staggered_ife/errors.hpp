#pragma once

#include <stdexcept>
#include <string>

namespace sife {

// Failure modes surfaced by the library. Each error carries a stable code so
// callers (CLI, bindings, Monte Carlo driver) can tell validation problems
// (bad input data or arguments) from estimation failures (singular designs,
// degenerate denominators) without string matching.
enum class ErrorCode {
  // input / validation
  MalformedInput,
  EmptyDataset,
  MissingCell,
  FirstPeriodTreated,
  GroupOutOfRange,
  LengthMismatch,
  BadArgument,
  // feasibility / identification
  NoFeasibleCells,
  InfeasibleCell,
  EmptyComparisonGroup,
  InsufficientComparisonGroups,
  RankDeficientOmega,
  // estimation
  SingularDesign,
  DegenerateDenominator,
  EmptyTreatedGroup,
  InsufficientPrePeriods,
  // inference / aggregation
  TooFewDraws,
  EmptyEventTime,
  GroupInfeasible,
  MissingCellEstimate,
};

const char* error_code_name(ErrorCode code);

// True for codes that indicate unusable input rather than a failed fit.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sife
