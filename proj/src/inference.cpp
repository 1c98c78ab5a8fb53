#include "staggered_ife/inference.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/linalg.hpp"
#include "staggered_ife/rng.hpp"

namespace sife {

Eigen::VectorXd influence_attgt(const AttEstimate& est, const PanelDataset& data,
                                const DiffPanel& diffs) {
  const CellIndex& cell = est.cell;
  const GmmFit& fit = est.fit;
  const int n = data.n_units();
  const GroupShares shares = group_shares(data);
  const double p_g = shares.at(cell.g);
  const Eigen::MatrixXd xt = rotated_prediffs(cell, fit.omega, diffs);
  const Eigen::VectorXd longdiff =
      data.outcomes().col(cell.t - 1) - data.outcomes().col(cell.g - 2);
  const Eigen::VectorXd delta = fit.delta();

  // Precompute E_n[1{G=g} d_i] and the comparison-row coefficients of psi2.
  const auto& treated = data.units_in_group(cell.g);
  double mean_gd = 0.0;
  for (int i : treated) mean_gd += longdiff(i);
  mean_gd /= n;  // E_n over the full sample

  const Eigen::RowVectorXd abar_b = (est.a_mean.transpose() * fit.b_matrix) / p_g;  // 1 x |comp|

  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  // Map each unit to its comparison-column (or -1).
  std::vector<int> comp_col(n, -1);
  for (std::size_t j = 0; j < fit.gamma.comparison.size(); ++j)
    for (int i : data.units_in_group(fit.gamma.comparison[j])) comp_col[i] = static_cast<int>(j);

  for (int i = 0; i < n; ++i) {
    const bool in_g = data.group(i) == cell.g;
    // (1) treated-side long difference
    double value = ((in_g ? longdiff(i) : 0.0) - mean_gd) / p_g;
    // (2) propagated fit error through the moment conditions
    const int j = comp_col[i];
    if (j >= 0) {
      const double v = longdiff(i) - fit.theta_star - xt.row(i).dot(fit.f_star);
      value -= abar_b(j) * v / shares.at(fit.gamma.comparison[static_cast<std::size_t>(j)]);
    }
    // (3) estimated design mean
    Eigen::VectorXd a_i = Eigen::VectorXd::Zero(delta.size());
    if (in_g) {
      a_i(0) = 1.0;
      a_i.tail(xt.cols()) = xt.row(i).transpose();
    }
    value -= delta.dot(a_i - est.a_mean) / p_g;
    // (4) estimated group share
    value -= est.att / p_g * ((in_g ? 1.0 : 0.0) - p_g);
    psi(i) = value;
  }
  return psi;
}

void attach_influence(AttEstimate& est, const PanelDataset& data, const DiffPanel& diffs) {
  est.influence = influence_attgt(est, data, diffs);
  const int n = data.n_units();
  const double var = est.influence.squaredNorm() / n;  // influence has mean ~0
  est.se = std::sqrt(var / n);
}

InfluencePanel stack_influence(const std::vector<std::string>& labels,
                               const std::vector<Eigen::VectorXd>& columns) {
  if (labels.size() != columns.size())
    fail(ErrorCode::LengthMismatch, "stack_influence: labels vs columns");
  if (columns.empty()) fail(ErrorCode::BadArgument, "stack_influence: nothing to stack");
  const Eigen::Index n = columns.front().size();
  InfluencePanel panel;
  panel.labels = labels;
  panel.values.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].size() != n)
      fail(ErrorCode::LengthMismatch, "stack_influence: column " + labels[k] + " has wrong length");
    panel.values.col(static_cast<Eigen::Index>(k)) = columns[k];
  }
  return panel;
}

const char* multiplier_law_name(MultiplierLaw law) {
  switch (law) {
    case MultiplierLaw::Rademacher: return "rademacher";
    case MultiplierLaw::Normal: return "normal";
    case MultiplierLaw::Zero: return "zero";
  }
  return "?";
}

BootstrapResult multiplier_bootstrap(const InfluencePanel& panel, const Eigen::VectorXd& estimates,
                                     int b_draws, MultiplierLaw law, std::uint64_t seed,
                                     int threads) {
  if (b_draws < 2) fail(ErrorCode::TooFewDraws, "need at least 2 bootstrap draws");
  if (estimates.size() != panel.values.cols())
    fail(ErrorCode::LengthMismatch, "estimates vs influence columns");
  const int n = static_cast<int>(panel.values.rows());
  BootstrapResult out;
  out.estimates = estimates;
  out.n_units = n;
  out.seed = seed;
  out.law = law;
  out.draws.resize(b_draws, panel.values.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  auto run_range = [&](int lo, int hi) {
    Eigen::VectorXd zeta(n);
    for (int b = lo; b < hi; ++b) {
      RngStream stream(seed, rng_tag::kBootstrap, static_cast<std::uint64_t>(b));
      switch (law) {
        case MultiplierLaw::Rademacher:
          for (int i = 0; i < n; ++i) zeta(i) = stream.next_rademacher();
          break;
        case MultiplierLaw::Normal:
          for (int i = 0; i < n; ++i) zeta(i) = stream.next_normal();
          break;
        case MultiplierLaw::Zero:
          zeta.setZero();
          break;
      }
      out.draws.row(b) = scale * (zeta.transpose() * panel.values);
    }
  };

  if (threads <= 1 || b_draws < 4) {
    run_range(0, b_draws);
  } else {
    const int workers = std::min(threads, b_draws);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      const int lo = b_draws * w / workers;
      const int hi = b_draws * (w + 1) / workers;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace {

double sigma_star(const BootstrapResult& result, int k) {
  std::vector<double> col(result.draws.rows());
  for (Eigen::Index b = 0; b < result.draws.rows(); ++b) col[b] = result.draws(b, k);
  std::sort(col.begin(), col.end());
  const double iqr = quantile_order_stat(col, 0.75) - quantile_order_stat(col, 0.25);
  return iqr / kNormalIqr;
}

}  // namespace

double se_from_bootstrap(const BootstrapResult& result, int k) {
  if (k < 0 || k >= result.draws.cols()) fail(ErrorCode::BadArgument, "bootstrap column index");
  return sigma_star(result, k) / std::sqrt(static_cast<double>(result.n_units));
}

SupTBand sup_t_band(const BootstrapResult& result, double level) {
  const Eigen::Index b_draws = result.draws.rows();
  const Eigen::Index k_cols = result.draws.cols();
  Eigen::VectorXd sig(k_cols);
  for (Eigen::Index k = 0; k < k_cols; ++k) sig(k) = sigma_star(result, static_cast<int>(k));
  std::vector<double> maxima(static_cast<std::size_t>(b_draws), 0.0);
  for (Eigen::Index b = 0; b < b_draws; ++b) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < k_cols; ++k) {
      if (sig(k) <= 0.0) continue;
      m = std::max(m, std::fabs(result.draws(b, k)) / sig(k));
    }
    maxima[static_cast<std::size_t>(b)] = m;
  }
  std::sort(maxima.begin(), maxima.end());
  SupTBand band;
  band.critical_value = quantile_order_stat(maxima, level);
  const double root_n = std::sqrt(static_cast<double>(result.n_units));
  band.half_width = band.critical_value * sig / root_n;
  for (Eigen::Index k = 0; k < k_cols; ++k)
    if (sig(k) <= 0.0) band.half_width(k) = 0.0;
  return band;
}

}  // namespace sife
