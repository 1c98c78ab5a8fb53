#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sife {

// Condition limit past which a linear system is treated as singular rather
// than solved. Rank decisions elsewhere use a relative 1e-8 cutoff on the
// singular values of the design itself; the solver guard below applies to the
// normal equations, whose condition number is roughly the square of that.
inline constexpr double kConditionLimit = 1e12;

struct SvdSolve {
  Eigen::MatrixXd solution;   // pseudo-inverse applied to the right-hand side
  double condition = 0.0;     // sigma_max / sigma_min (inf if sigma_min == 0)
  bool ok = true;             // false when condition exceeds the limit
};

// Least-squares solve of A x = b through the SVD, with tiny singular values
// (relative 1e-15) truncated. Never throws; callers decide what a failed
// condition check means in their context.
SvdSolve svd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                   double condition_limit = kConditionLimit);

// Moore-Penrose pseudo-inverse with the same truncation rule.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a);

// Singular values in decreasing order.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& a);

// Deterministic fixed-order pairwise summation; the reduction used for Monte
// Carlo summaries so results do not depend on accumulation order or thread
// count.
double pairwise_sum(const double* values, std::size_t count);
double pairwise_sum(const std::vector<double>& values);

// Order-statistic quantile with interpolation at position p*(B+1), clamped to
// [1, B] (Hyndman-Fan type 6). `sorted` must be ascending.
double quantile_order_stat(const std::vector<double>& sorted, double p);

// Median of |values| (used for the MAD column of simulation summaries).
double median_abs(std::vector<double> values);

}  // namespace sife
