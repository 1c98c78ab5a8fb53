#include "staggered_ife/identification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/linalg.hpp"

namespace sife {

std::string cell_label(const CellIndex& cell) {
  return "(g=" + std::to_string(cell.g) + ", t=" + std::to_string(cell.t) + ")";
}

std::vector<int> comparison_set(int g, int t, const std::vector<int>& groups_present) {
  std::vector<int> out;
  for (int gp : groups_present)
    if (gp > t) out.push_back(gp);
  // groups_present is ascending with kNever last, and filtering preserves
  // order, so the invariant holds by construction.
  return out;
}

int last_feasible_period(int g, int t_count, int r, const std::vector<int>& groups_present) {
  int best = 0;
  for (int t = g; t <= t_count; ++t) {
    const auto comp = comparison_set(g, t, groups_present);
    if (static_cast<int>(comp.size()) >= r + 1) best = t;
  }
  return best;
}

std::vector<CellIndex> feasible_cells(const PanelDataset& data, int r) {
  if (r < 0) fail(ErrorCode::BadArgument, "factor count must be >= 0");
  const auto groups = data.groups_present();
  std::vector<CellIndex> cells;
  for (int g : data.treated_groups_present()) {
    if (g - 2 < r) continue;  // not enough pre-period differences to rotate
    const int t_hi = last_feasible_period(g, data.n_periods(), r, groups);
    for (int t = g; t <= t_hi; ++t) cells.push_back({g, t, r});
  }
  if (cells.empty())
    fail(ErrorCode::NoFeasibleCells,
         "no (group, period) cell is estimable with " + std::to_string(r) + " factors");
  std::sort(cells.begin(), cells.end());
  return cells;
}

OmegaMatrix build_omega(const OmegaSpec& spec, const CellIndex& cell, const PanelDataset& data) {
  const int pre = cell.g - 2;  // number of pre-period differences dY_2..dY_{g-1}
  const int r = spec.r;
  if (r < 0 || pre < r)
    fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": needs " + std::to_string(r) +
                                        " pre-period differences, has " + std::to_string(pre));
  OmegaMatrix omega;
  omega.kind = spec.kind;
  omega.values = Eigen::MatrixXd::Zero(pre, r);
  if (r == 0) return omega;

  if (spec.kind == OmegaKind::LastBlock) {
    std::vector<int> periods = spec.periods;
    if (periods.empty()) {
      for (int k = 0; k < r; ++k) periods.push_back(cell.g - r + k);  // last r changes
    }
    if (static_cast<int>(periods.size()) != r)
      fail(ErrorCode::BadArgument, "omega periods: need exactly " + std::to_string(r) + " entries");
    std::vector<int> sorted = periods;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::BadArgument, "omega periods must be distinct");
    for (int k = 0; k < r; ++k) {
      const int s = periods[k];
      if (s < 2 || s > cell.g - 1)
        fail(ErrorCode::BadArgument, "omega period " + std::to_string(s) +
                                         " outside the pre-window of cell " + cell_label(cell));
      omega.values(s - 2, k) = 1.0;
    }
    return omega;
  }

  // PrincipalComponents: SVD of the comparison units' centered pre-changes.
  const auto comp = comparison_set(cell.g, cell.t, data.groups_present());
  if (static_cast<int>(comp.size()) < 1)
    fail(ErrorCode::EmptyComparisonGroup, "cell " + cell_label(cell) + ": no comparison group");
  const DiffPanel diffs = first_differences(data);
  int n_comp = 0;
  for (int gp : comp) n_comp += data.group_count(gp);
  Eigen::MatrixXd x(n_comp, pre);
  int row = 0;
  for (int gp : comp)
    for (int i : data.units_in_group(gp)) x.row(row++) = diffs.diffs.row(i).head(pre);
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  if (sigma.size() < r || sigma(0) <= 0.0 || sigma(r - 1) <= kRankTol * sigma(0))
    fail(ErrorCode::RankDeficientOmega,
         "cell " + cell_label(cell) + ": comparison pre-differences have fewer than " +
             std::to_string(r) + " principal directions");
  omega.values = svd.matrixV().leftCols(r);
  // Fix signs deterministically: largest-magnitude entry of each column
  // (lowest row on ties) made positive.
  for (int k = 0; k < r; ++k) {
    int arg = 0;
    double best = -1.0;
    for (int j = 0; j < pre; ++j) {
      const double a = std::fabs(omega.values(j, k));
      if (a > best) {  // strict: first index wins ties
        best = a;
        arg = j;
      }
    }
    if (omega.values(arg, k) < 0.0) omega.values.col(k) = -omega.values.col(k);
  }
  return omega;
}

Eigen::MatrixXd rotated_prediffs(const CellIndex& cell, const OmegaMatrix& omega,
                                 const DiffPanel& diffs) {
  const int pre = cell.g - 2;
  if (omega.values.rows() != pre)
    fail(ErrorCode::LengthMismatch, "omega rows != pre-period differences for " + cell_label(cell));
  return diffs.diffs.leftCols(pre) * omega.values;  // n x r
}

GammaHat gamma_hat(const CellIndex& cell, const OmegaMatrix& omega, const PanelDataset& data,
                   const DiffPanel& diffs) {
  const auto comp = comparison_set(cell.g, cell.t, data.groups_present());
  if (comp.empty())
    fail(ErrorCode::EmptyComparisonGroup, "cell " + cell_label(cell) + ": no comparison group");
  const Eigen::MatrixXd xt = rotated_prediffs(cell, omega, diffs);
  GammaHat gamma;
  gamma.cell = cell;
  gamma.comparison = comp;
  gamma.values.resize(static_cast<Eigen::Index>(comp.size()), omega.values.cols() + 1);
  for (std::size_t j = 0; j < comp.size(); ++j) {
    const auto& units = data.units_in_group(comp[j]);
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(xt.cols());
    for (int i : units) mean += xt.row(i);
    mean /= static_cast<double>(units.size());
    gamma.values(static_cast<Eigen::Index>(j), 0) = 1.0;
    gamma.values.row(static_cast<Eigen::Index>(j)).tail(xt.cols()) = mean;
  }
  return gamma;
}

RankReport rank_diagnostic(const GammaHat& gamma, double tol) {
  RankReport rep;
  rep.cell = gamma.cell;
  rep.sigma = singular_values(gamma.values);
  const Eigen::Index need = gamma.values.cols();
  if (gamma.values.rows() < need || rep.sigma.size() < need || rep.sigma(0) <= 0.0) {
    rep.rank_ok = false;
    rep.condition = std::numeric_limits<double>::infinity();
    rep.sigma_ratio = 0.0;
    return rep;
  }
  const double smin = rep.sigma(need - 1);
  rep.sigma_ratio = smin / rep.sigma(0);
  rep.condition = (smin > 0.0) ? rep.sigma(0) / smin : std::numeric_limits<double>::infinity();
  rep.rank_ok = rep.sigma_ratio > tol;
  return rep;
}

TrendGapReport factor_count_diagnostic(const PanelDataset& data, int g, int t) {
  TrendGapReport rep;
  rep.g = g;
  rep.t = t;
  const auto comp = comparison_set(g, t, data.groups_present());
  if (comp.size() < 2)
    fail(ErrorCode::InsufficientComparisonGroups,
         "need at least 2 comparison groups at t=" + std::to_string(t));
  if (g < 2 || t < g || t > data.n_periods())
    fail(ErrorCode::BadArgument, "bad (g,t) for trend-gap diagnostic");
  const DiffPanel diffs = first_differences(data);

  auto moments = [&](int gp, int s, double& mean, double& var, int& count) {
    const auto& units = data.units_in_group(gp);
    count = static_cast<int>(units.size());
    const Eigen::VectorXd col = diffs.at(s);
    double m = 0.0;
    for (int i : units) m += col(i);
    m /= count;
    double v = 0.0;
    for (int i : units) v += (col(i) - m) * (col(i) - m);
    var = (count > 1) ? v / (count - 1) : std::numeric_limits<double>::quiet_NaN();
    mean = m;
  };

  for (std::size_t a = 0; a + 1 < comp.size(); ++a) {
    for (std::size_t b = a + 1; b < comp.size(); ++b) {
      bool pre_flat = true;
      double z_at_t = 0.0;
      for (int s = 2; s <= t; ++s) {
        double m1, v1, m2, v2;
        int c1, c2;
        moments(comp[a], s, m1, v1, c1);
        moments(comp[b], s, m2, v2, c2);
        TrendGapReport::Gap gap;
        gap.g1 = comp[a];
        gap.g2 = comp[b];
        gap.s = s;
        gap.gap = m1 - m2;
        gap.se = (c1 > 1 && c2 > 1) ? std::sqrt(v1 / c1 + v2 / c2)
                                    : std::numeric_limits<double>::quiet_NaN();
        gap.z = (gap.se > 0.0) ? gap.gap / gap.se : std::numeric_limits<double>::quiet_NaN();
        rep.gaps.push_back(gap);
        if (s <= g - 1 && std::isfinite(gap.z) && std::fabs(gap.z) > 1.96) pre_flat = false;
        if (s == t) z_at_t = gap.z;
      }
      if (pre_flat && std::isfinite(z_at_t) && std::fabs(z_at_t) > 1.96)
        rep.suggests_more_factors = true;
    }
  }
  return rep;
}

}  // namespace sife
