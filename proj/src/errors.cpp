#include "staggered_ife/errors.hpp"

namespace sife {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::FirstPeriodTreated: return "FirstPeriodTreated";
    case ErrorCode::GroupOutOfRange: return "GroupOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::NoFeasibleCells: return "NoFeasibleCells";
    case ErrorCode::InfeasibleCell: return "InfeasibleCell";
    case ErrorCode::EmptyComparisonGroup: return "EmptyComparisonGroup";
    case ErrorCode::InsufficientComparisonGroups: return "InsufficientComparisonGroups";
    case ErrorCode::RankDeficientOmega: return "RankDeficientOmega";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::EmptyTreatedGroup: return "EmptyTreatedGroup";
    case ErrorCode::InsufficientPrePeriods: return "InsufficientPrePeriods";
    case ErrorCode::TooFewDraws: return "TooFewDraws";
    case ErrorCode::EmptyEventTime: return "EmptyEventTime";
    case ErrorCode::GroupInfeasible: return "GroupInfeasible";
    case ErrorCode::MissingCellEstimate: return "MissingCellEstimate";
  }
  return "UnknownError";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput:
    case ErrorCode::EmptyDataset:
    case ErrorCode::MissingCell:
    case ErrorCode::FirstPeriodTreated:
    case ErrorCode::GroupOutOfRange:
    case ErrorCode::LengthMismatch:
    case ErrorCode::BadArgument:
    case ErrorCode::NoFeasibleCells:
      return true;
    default:
      return false;
  }
}

}  // namespace sife
