#include "staggered_ife/estimator.hpp"

#include <cmath>
#include <string>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/linalg.hpp"

namespace sife {

namespace {

void check_cell(const CellIndex& cell, const PanelDataset& data) {
  if (cell.g < 2 || cell.g > data.n_periods())
    fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": group outside 2..T");
  if (cell.t < cell.g || cell.t > data.n_periods())
    fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": period outside g..T");
  if (data.group_count(cell.g) == 0)
    fail(ErrorCode::EmptyTreatedGroup, "cell " + cell_label(cell) + ": no units in group");
}

Eigen::VectorXd group_mean_longdiff(const PanelDataset& data, const std::vector<int>& groups,
                                    int t, int base) {
  Eigen::VectorXd out(groups.size());
  const Eigen::VectorXd diff = data.outcomes().col(t - 1) - data.outcomes().col(base - 1);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto& units = data.units_in_group(groups[j]);
    double m = 0.0;
    for (int i : units) m += diff(i);
    out(static_cast<Eigen::Index>(j)) = m / static_cast<double>(units.size());
  }
  return out;
}

}  // namespace

Eigen::VectorXd comparison_longdiff_means(const CellIndex& cell, const PanelDataset& data) {
  const auto comp = comparison_set(cell.g, cell.t, data.groups_present());
  if (comp.empty())
    fail(ErrorCode::EmptyComparisonGroup, "cell " + cell_label(cell) + ": no comparison group");
  return group_mean_longdiff(data, comp, cell.t, cell.g - 1);
}

GmmFit estimate_delta_star(const CellIndex& cell, const OmegaMatrix& omega,
                           const PanelDataset& data, const DiffPanel& diffs,
                           const Eigen::MatrixXd& weight) {
  check_cell(cell, data);
  const int r = static_cast<int>(omega.values.cols());
  GmmFit fit;
  fit.cell = cell;
  fit.omega = omega;
  fit.gamma = gamma_hat(cell, omega, data, diffs);
  const int n_comp = static_cast<int>(fit.gamma.comparison.size());
  if (n_comp < r + 1)
    fail(ErrorCode::InfeasibleCell,
         "cell " + cell_label(cell) + ": " + std::to_string(n_comp) +
             " comparison group(s) cannot identify " + std::to_string(r + 1) + " parameters");
  if (weight.rows() != n_comp || weight.cols() != n_comp)
    fail(ErrorCode::LengthMismatch, "weight matrix must be " + std::to_string(n_comp) + " square");
  fit.weight = weight;

  const Eigen::VectorXd m_hat = comparison_longdiff_means(cell, data);
  // Solve the GMM problem through the weighted design W^{1/2} Gamma rather
  // than the normal equations: same minimizer, but the condition number is
  // not squared, so the singularity guard reflects the design itself.
  Eigen::MatrixXd w_half;
  if (weight.isIdentity(0.0)) {
    w_half = weight;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weight);
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    w_half = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
  }
  const Eigen::MatrixXd design = w_half * fit.gamma.values;  // |comp| x (r+1)
  const SvdSolve solve = svd_solve(design, w_half);
  if (!solve.ok)
    fail(ErrorCode::SingularDesign,
         "cell " + cell_label(cell) + ": moment design is numerically singular (condition " +
             std::to_string(solve.condition) + "); check rank diagnostics / factor count");
  fit.b_matrix = solve.solution;  // (r+1) x |comp| = (W^{1/2} Gamma)^+ W^{1/2}
  const Eigen::VectorXd delta = fit.b_matrix * m_hat;
  fit.theta_star = delta(0);
  fit.f_star = delta.tail(r);
  fit.moment_values = m_hat - fit.gamma.values * delta;
  return fit;
}

Eigen::MatrixXd make_weight(const CellIndex& cell, const OmegaMatrix& omega,
                            const PanelDataset& data, const DiffPanel& diffs, WeightMode mode) {
  const auto comp = comparison_set(cell.g, cell.t, data.groups_present());
  const int n_comp = static_cast<int>(comp.size());
  if (mode == WeightMode::Identity) return Eigen::MatrixXd::Identity(n_comp, n_comp);

  // Two-step: residuals from an identity-weight first stage drive the
  // covariance of the stacked moment contributions l_i * v_i.
  const GmmFit first = estimate_delta_star(cell, omega, data, diffs,
                                           Eigen::MatrixXd::Identity(n_comp, n_comp));
  const GroupShares shares = group_shares(data);
  const Eigen::MatrixXd xt = rotated_prediffs(cell, omega, diffs);
  const Eigen::VectorXd longdiff =
      data.outcomes().col(cell.t - 1) - data.outcomes().col(cell.g - 2);
  const int n = data.n_units();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n_comp);
  for (int j = 0; j < n_comp; ++j) {
    const double pj = shares.at(comp[j]);
    for (int i : data.units_in_group(comp[j])) {
      const double v = longdiff(i) - first.theta_star - xt.row(i).dot(first.f_star);
      z(i, j) = v / pj;
    }
  }
  const Eigen::RowVectorXd zbar = z.colwise().mean();
  z.rowwise() -= zbar;
  Eigen::MatrixXd sigma = (z.transpose() * z) / static_cast<double>(n);
  const double ridge = 1e-10 * sigma.trace() / static_cast<double>(n_comp);
  sigma += ridge * Eigen::MatrixXd::Identity(n_comp, n_comp);
  return pseudo_inverse(sigma);
}

AttEstimate estimate_attgt(const CellIndex& cell, const GmmFit& fit, const PanelDataset& data,
                           const DiffPanel& diffs) {
  check_cell(cell, data);
  AttEstimate est;
  est.cell = cell;
  est.fit = fit;
  const Eigen::MatrixXd xt = rotated_prediffs(cell, fit.omega, diffs);
  const auto& treated = data.units_in_group(cell.g);
  const double p_hat = static_cast<double>(treated.size()) / data.n_units();
  const Eigen::VectorXd longdiff =
      data.outcomes().col(cell.t - 1) - data.outcomes().col(cell.g - 2);

  Eigen::VectorXd mean_x = Eigen::VectorXd::Zero(xt.cols());
  double mean_d = 0.0;
  for (int i : treated) {
    mean_x += xt.row(i).transpose();
    mean_d += longdiff(i);
  }
  mean_x /= static_cast<double>(treated.size());
  mean_d /= static_cast<double>(treated.size());

  est.a_mean.resize(xt.cols() + 1);
  est.a_mean(0) = p_hat;
  est.a_mean.tail(xt.cols()) = p_hat * mean_x;
  est.att = mean_d - (fit.theta_star + mean_x.dot(fit.f_star));
  est.influence = Eigen::VectorXd();  // attached by the inference layer
  est.se = 0.0;
  return est;
}

BaselineSolution baseline_f3_closed_form(const BaselineMoments& m, double deg_tol) {
  const double denom = m.dy2_never - m.dy2_g4;
  if (!(std::fabs(denom) > deg_tol))
    fail(ErrorCode::DegenerateDenominator,
         "pre-period trend gap between later-treated and never-treated is ~0 (" +
             std::to_string(denom) + "); the factor contrast is not identified");
  BaselineSolution out;
  out.f3_star = (m.dy3_never - m.dy3_g4) / denom;
  out.theta3_star = m.dy3_g4 - out.f3_star * m.dy2_g4;
  return out;
}

double baseline_deg_tol(const PanelDataset& data) {
  const DiffPanel diffs = first_differences(data);
  const Eigen::VectorXd d2 = diffs.at(2);
  const double mean = d2.mean();
  const double var = (d2.array() - mean).square().sum() / std::max(1, data.n_units() - 1);
  return 1e-10 * std::sqrt(var);
}

}  // namespace sife
