#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "staggered_ife/panel.hpp"

namespace sife {

// Relative singular-value cutoff for rank decisions on the moment design.
inline constexpr double kRankTol = 1e-8;

// A group-time target: the average effect for group g at period t, estimated
// with r factors removed. Ordered by (g, t).
struct CellIndex {
  int g = 0;
  int t = 0;
  int r = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex& a, const CellIndex& b) {
    if (auto c = a.g <=> b.g; c != 0) return c;
    return a.t <=> b.t;
  }
};

std::string cell_label(const CellIndex& cell);

// Groups still untreated at t (g' > t), ascending with never-treated last.
// May be empty; feasibility is the caller's question.
std::vector<int> comparison_set(int g, int t, const std::vector<int>& groups_present);

// Largest t such that at least r+1 comparison groups remain, or 0 if none.
int last_feasible_period(int g, int t_count, int r, const std::vector<int>& groups_present);

// All (g,t) cells estimable with r factors: g needs at least r pre-period
// differences (g - 2 >= r) and t runs from g to the last period with r+1
// comparison groups. Throws NoFeasibleCells when empty.
std::vector<CellIndex> feasible_cells(const PanelDataset& data, int r);

enum class OmegaKind { LastBlock, PrincipalComponents };

struct OmegaSpec {
  OmegaKind kind = OmegaKind::LastBlock;
  int r = 0;
  // Expert override for LastBlock: pick which pre-period changes form the
  // rows of the rotation (periods in 2..g-1, exactly r of them). Empty means
  // the last r pre-period changes.
  std::vector<int> periods;
};

// (g-2) x r rotation applied to the pre-period differences. LastBlock selects
// coordinates; PrincipalComponents takes the top right singular vectors of
// the comparison units' centered pre-differences, each column sign-fixed so
// its largest-magnitude entry is positive.
struct OmegaMatrix {
  Eigen::MatrixXd values;
  OmegaKind kind = OmegaKind::LastBlock;
};

OmegaMatrix build_omega(const OmegaSpec& spec, const CellIndex& cell, const PanelDataset& data);

// Rotated pre-period differences for every unit: row i = omega' * dY_i^pre.
Eigen::MatrixXd rotated_prediffs(const CellIndex& cell, const OmegaMatrix& omega,
                                 const DiffPanel& diffs);

// Empirical moment design for one cell: one row per comparison group,
// row = (1, mean of rotated pre-differences within that group).
struct GammaHat {
  CellIndex cell;
  std::vector<int> comparison;     // ascending, never last
  Eigen::MatrixXd values;          // |comparison| x (r+1)
};

GammaHat gamma_hat(const CellIndex& cell, const OmegaMatrix& omega, const PanelDataset& data,
                   const DiffPanel& diffs);

// Identification check: the design must have full column rank r+1 for the
// cell's moments to pin down (theta*, F*). Never throws; estimation consults
// it and refuses to fit on failure.
struct RankReport {
  CellIndex cell;
  bool rank_ok = false;
  Eigen::VectorXd sigma;     // singular values, decreasing
  double condition = 0.0;    // sigma_1 / sigma_{r+1}
  double sigma_ratio = 0.0;  // sigma_{r+1} / sigma_1
};

RankReport rank_diagnostic(const GammaHat& gamma, double tol = kRankTol);

// Between-group trend gaps used to second-guess the working factor count:
// if no pre-period gap between two comparison groups is distinguishable from
// zero but the period-t gap is, differencing alone cannot explain period t
// and more factors are indicated.
struct TrendGapReport {
  struct Gap {
    int g1 = 0, g2 = 0;  // comparison groups, g1 < g2 (never last)
    int s = 0;           // period of the difference, 2..t
    double gap = 0.0;    // mean dY_s | g1  -  mean dY_s | g2
    double se = 0.0;
    double z = 0.0;
  };
  int g = 0, t = 0;
  std::vector<Gap> gaps;
  bool suggests_more_factors = false;
};

TrendGapReport factor_count_diagnostic(const PanelDataset& data, int g, int t);

}  // namespace sife
