#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "staggered_ife/estimator.hpp"

namespace sife {

// Critical value and the normal IQR used to turn bootstrap quartile spread
// into a standard deviation (q0.75 - q0.25 of a standard normal).
inline constexpr double kZ975 = 1.959963984540054;
inline constexpr double kNormalIqr = 1.348979500392164;

// Per-unit influence contribution for one cell estimate. Four pieces:
// the treated-side long difference, the propagated moment-fit error, the
// estimated design mean, and the group-share estimate. The sample mean is
// exactly zero (the fit's first-order condition kills the only non-centered
// term).
Eigen::VectorXd influence_attgt(const AttEstimate& est, const PanelDataset& data,
                                const DiffPanel& diffs);

// Convenience: fill influence + analytic se (sd of the influence over sqrt n)
// on a freshly estimated cell.
void attach_influence(AttEstimate& est, const PanelDataset& data, const DiffPanel& diffs);

// Named columns of per-unit influence contributions; cells and any aggregate
// columns share the rows (units), so one set of multiplier draws moves them
// jointly.
struct InfluencePanel {
  Eigen::MatrixXd values;           // n x K
  std::vector<std::string> labels;  // K
};

InfluencePanel stack_influence(const std::vector<std::string>& labels,
                               const std::vector<Eigen::VectorXd>& columns);

enum class MultiplierLaw { Rademacher, Normal, Zero /* degenerate, tests only */ };

const char* multiplier_law_name(MultiplierLaw law);

// Multiplier-bootstrap draws: row b holds n^{-1/2} sum_i zeta_i^{(b)} Psi_i
// for every column, with zeta drawn from one stream per b (so parallel and
// serial runs agree bit for bit).
struct BootstrapResult {
  Eigen::MatrixXd draws;  // B x K, sqrt(n) * (att* - att)
  Eigen::VectorXd estimates;
  int n_units = 0;
  std::uint64_t seed = 0;
  MultiplierLaw law = MultiplierLaw::Rademacher;
};

BootstrapResult multiplier_bootstrap(const InfluencePanel& panel, const Eigen::VectorXd& estimates,
                                     int b_draws, MultiplierLaw law, std::uint64_t seed,
                                     int threads = 1);

// Robust bootstrap standard error for column k: interquartile range of the
// draws divided by the normal IQR, rescaled by 1/sqrt(n).
double se_from_bootstrap(const BootstrapResult& result, int k);

// Simultaneous confidence bands: critical value = 0.95-quantile over draws of
// max_k |draw_bk| / sigma*_k, half-width_k = c * sigma*_k / sqrt(n).
// Columns whose sigma* is zero get a zero half-width and are excluded from
// the max.
struct SupTBand {
  double critical_value = 0.0;
  Eigen::VectorXd half_width;
};

SupTBand sup_t_band(const BootstrapResult& result, double level = 0.95);

}  // namespace sife
