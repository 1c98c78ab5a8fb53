#pragma once

#include <Eigen/Dense>
#include <vector>

#include "staggered_ife/identification.hpp"
#include "staggered_ife/panel.hpp"

namespace sife {

enum class WeightMode { Identity, TwoStep };

// Fitted moment system for one cell. theta_star is the composite time effect
// and f_star the rotated factor contrast; together they give the counterfactual
// change theta* + x' F* for a unit with rotated pre-differences x.
struct GmmFit {
  CellIndex cell;
  double theta_star = 0.0;
  Eigen::VectorXd f_star;        // r
  GammaHat gamma;                // design, one row per comparison group
  OmegaMatrix omega;
  Eigen::MatrixXd weight;        // |comp| x |comp|
  Eigen::MatrixXd b_matrix;      // (r+1) x |comp|, (Gamma' W Gamma)^+ Gamma' W
  Eigen::VectorXd moment_values; // m_hat - Gamma * delta_hat, ~0 when just-identified
  Eigen::VectorXd delta() const {
    Eigen::VectorXd d(f_star.size() + 1);
    d(0) = theta_star;
    d.tail(f_star.size()) = f_star;
    return d;
  }
};

// Per-group means of the long difference Y_t - Y_{g-1}, one entry per
// comparison group (the target side of the moment conditions).
Eigen::VectorXd comparison_longdiff_means(const CellIndex& cell, const PanelDataset& data);

// GMM estimate of (theta*, F*) for one cell:
//   delta = (Gamma' W Gamma)^+ Gamma' W m_hat.
// Rank problems surface as SingularDesign rather than numbers.
GmmFit estimate_delta_star(const CellIndex& cell, const OmegaMatrix& omega,
                           const PanelDataset& data, const DiffPanel& diffs,
                           const Eigen::MatrixXd& weight);

// Weight matrix for a cell: identity, or the two-step choice = pseudo-inverse
// of the centered covariance of the weighted moment contributions from an
// identity-weight first stage (ridged by 1e-10 * trace/dim).
Eigen::MatrixXd make_weight(const CellIndex& cell, const OmegaMatrix& omega,
                            const PanelDataset& data, const DiffPanel& diffs, WeightMode mode);

// One cell's effect estimate. influence and se are filled by the inference
// layer; the estimator itself only produces the point estimate and the pieces
// inference needs.
struct AttEstimate {
  CellIndex cell;
  double att = 0.0;
  Eigen::VectorXd a_mean;     // E_n[ 1{G=g} (1, x') ], r+1
  GmmFit fit;
  Eigen::VectorXd influence;  // length n, mean zero once attached
  double se = 0.0;
};

AttEstimate estimate_attgt(const CellIndex& cell, const GmmFit& fit, const PanelDataset& data,
                           const DiffPanel& diffs);

// Two-period-pre closed form for the earliest 1-factor cell (g=3, t=3 in a
// 4-period design with groups {3, 4, never}):
//   F3* = (E[dY3|never] - E[dY3|4]) / (E[dY2|never] - E[dY2|4])
//   theta3* = E[dY3|4] - F3* E[dY2|4]
// Used as an independent cross-check of the GMM path.
struct BaselineMoments {
  double dy3_never = 0.0;
  double dy3_g4 = 0.0;
  double dy2_never = 0.0;
  double dy2_g4 = 0.0;
};

struct BaselineSolution {
  double theta3_star = 0.0;
  double f3_star = 0.0;
};

BaselineSolution baseline_f3_closed_form(const BaselineMoments& m, double deg_tol);

// Degeneracy cutoff used by the closed form when moments come from data:
// 1e-10 times the pooled standard deviation of the first pre-period change.
double baseline_deg_tol(const PanelDataset& data);

}  // namespace sife
