#include "staggered_ife/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "staggered_ife/errors.hpp"

namespace sife {

namespace {

// Shared core: SVD with relative truncation of tiny singular values.
struct Decomp {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  double condition;
  explicit Decomp(const Eigen::MatrixXd& a)
      : svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(s.size() - 1) <= 0.0) {
      condition = std::numeric_limits<double>::infinity();
    } else {
      condition = s(0) / (s(s.size() - 1));
    }
  }
  Eigen::MatrixXd apply_pinv(const Eigen::MatrixXd& b) const {
    const auto& s = svd.singularValues();
    const double cutoff = (s.size() > 0 ? s(0) : 0.0) * 1e-15;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * b);
  }
};

}  // namespace

SvdSolve svd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double condition_limit) {
  if (a.rows() != b.rows()) fail(ErrorCode::LengthMismatch, "svd_solve: row mismatch");
  Decomp d(a);
  SvdSolve out;
  out.condition = d.condition;
  out.ok = d.condition <= condition_limit;
  out.solution = d.apply_pinv(b);
  return out;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a) {
  Decomp d(a);
  return d.apply_pinv(Eigen::MatrixXd::Identity(a.rows(), a.rows()));
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues();
}

double pairwise_sum(const double* values, std::size_t count) {
  if (count == 0) return 0.0;
  if (count == 1) return values[0];
  if (count == 2) return values[0] + values[1];
  const std::size_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(values.data(), values.size());
}

double quantile_order_stat(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::BadArgument, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::BadArgument, "quantile level outside [0,1]");
  const std::size_t b = sorted.size();
  double h = p * static_cast<double>(b + 1);
  h = std::clamp(h, 1.0, static_cast<double>(b));
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo >= b) return sorted[b - 1];
  return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

double median_abs(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::BadArgument, "median of empty sample");
  for (double& v : values) v = std::fabs(v);
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  if (values.size() % 2 == 1) return values[m];
  return 0.5 * (values[m - 1] + values[m]);
}

}  // namespace sife
