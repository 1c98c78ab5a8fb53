#pragma once

#include <string>
#include <vector>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/estimator.hpp"
#include "staggered_ife/inference.hpp"

namespace sife {

// One-stop per-cell estimation: build omega and the weight, check the rank
// diagnostic, fit, and attach the influence/analytic se. Shared by the CLI,
// the bindings, and the simulation comparators.
struct CellOptions {
  int r = 0;
  OmegaKind omega = OmegaKind::LastBlock;
  std::vector<int> omega_periods;  // expert override for LastBlock
  WeightMode weight = WeightMode::Identity;
  double rank_tol = kRankTol;
};

struct CellOutcome {
  CellIndex cell;
  bool ok = false;
  ErrorCode code = ErrorCode::SingularDesign;  // meaningful when !ok
  std::string message;
  AttEstimate est;   // valid when ok
  RankReport rank;   // filled whenever the design could be formed
};

// keep_going=false: first failing cell throws. keep_going=true: failures are
// recorded per cell and estimation continues.
std::vector<CellOutcome> estimate_cells(const PanelDataset& data,
                                        const std::vector<CellIndex>& cells,
                                        const CellOptions& options, bool keep_going);

// Strict variant returning only the estimates (influence attached).
std::vector<AttEstimate> estimate_cells_strict(const PanelDataset& data,
                                               const std::vector<CellIndex>& cells,
                                               const CellOptions& options);

}  // namespace sife
