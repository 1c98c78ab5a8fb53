#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <functional>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/identification.hpp"
#include "staggered_ife/panel.hpp"
#include "staggered_ife/rng.hpp"
#include "staggered_ife/simulate.hpp"

using namespace sife;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::MalformedInput;
}

// Panel with the requested groups, enough units per group, junk outcomes.
PanelDataset make_panel(int periods, const std::vector<int>& groups, int per_group = 3) {
  std::vector<int> g;
  for (int grp : groups)
    for (int k = 0; k < per_group; ++k) g.push_back(grp);
  RngStream s(123, rng_tag::kGeneric, 0);
  Eigen::MatrixXd y(g.size(), periods);
  for (int i = 0; i < y.rows(); ++i)
    for (int t = 0; t < periods; ++t) y(i, t) = s.next_normal();
  return PanelDataset(y, g);
}

}  // namespace

TEST_CASE("comparison sets are the not-yet-treated, never last") {
  const std::vector<int> present{2, 3, 4, kNever};
  CHECK(comparison_set(2, 2, present) == std::vector<int>{3, 4, kNever});
  CHECK(comparison_set(2, 3, present) == std::vector<int>{4, kNever});
  CHECK(comparison_set(3, 3, present) == std::vector<int>{4, kNever});
  CHECK(comparison_set(4, 4, present) == std::vector<int>{kNever});
  CHECK(comparison_set(2, 4, present) == std::vector<int>{kNever});

  const std::vector<int> no_never{2, 3, 4};
  CHECK(comparison_set(2, 2, no_never) == std::vector<int>{3, 4});
  CHECK(comparison_set(3, 3, no_never) == std::vector<int>{4});
  CHECK(comparison_set(4, 4, no_never).empty());
}

TEST_CASE("feasible cells: two-period-pre design") {
  const PanelDataset data = make_panel(4, {3, 4, kNever});
  const auto cells = feasible_cells(data, 1);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].g == 3);
  CHECK(cells[0].t == 3);
}

TEST_CASE("feasible cells: benchmark design at each factor count") {
  const PanelDataset data = make_panel(8, {5, 6, 7, 8, kNever});

  // r = 0 needs one comparison group, which the never-treated provide even
  // at t = 8: g=5 gets 4 cells, g=6 3, g=7 2, g=8 1.
  const auto r0 = feasible_cells(data, 0);
  CHECK(r0.size() == 10);

  // r = 1: g - 2 >= 1 always; t needs 2 comparison groups, so t <= 7.
  const auto r1 = feasible_cells(data, 1);
  CHECK(r1.size() == 6);
  for (const auto& c : r1) {
    CHECK(c.t <= 7);
    CHECK(c.t >= c.g);
  }

  // r = 2: t needs 3 comparison groups, so t <= 6: (5,5), (5,6), (6,6).
  const auto r2 = feasible_cells(data, 2);
  REQUIRE(r2.size() == 3);
  CHECK(r2[0] == CellIndex{5, 5, 2});
  CHECK(r2[1] == CellIndex{5, 6, 2});
  CHECK(r2[2] == CellIndex{6, 6, 2});
}

TEST_CASE("feasible cells: long panel, r = 2") {
  const PanelDataset data = make_panel(8, {2, 3, 4, 5, 6, 7, 8, kNever});
  const auto cells = feasible_cells(data, 2);
  std::vector<int> gs;
  for (const auto& c : cells) {
    if (gs.empty() || gs.back() != c.g) gs.push_back(c.g);
    CHECK(c.t <= 6);
  }
  CHECK(gs == std::vector<int>{4, 5, 6});
}

TEST_CASE("no feasible cells throws") {
  const PanelDataset data = make_panel(3, {2, kNever});
  CHECK(code_of([&] { feasible_cells(data, 1); }) == ErrorCode::NoFeasibleCells);
}

TEST_CASE("last block omega selects the trailing pre-period changes") {
  const PanelDataset data = make_panel(6, {4, 5, kNever});
  OmegaSpec spec;
  spec.r = 1;
  CellIndex cell{4, 4, 1};
  const auto omega = build_omega(spec, cell, data);
  // pre-period changes for g=4 are at s=2,3; the last one is s=3.
  REQUIRE(omega.values.rows() == 2);
  REQUIRE(omega.values.cols() == 1);
  CHECK(omega.values(0, 0) == 0.0);
  CHECK(omega.values(1, 0) == 1.0);

  // Expert override: pick s=2 instead.
  spec.periods = {2};
  const auto omega2 = build_omega(spec, cell, data);
  CHECK(omega2.values(0, 0) == 1.0);
  CHECK(omega2.values(1, 0) == 0.0);

  // r = 0 is an empty rotation.
  OmegaSpec spec0;
  spec0.r = 0;
  const auto omega0 = build_omega(spec0, cell, data);
  CHECK(omega0.values.cols() == 0);

  // Bad overrides are rejected.
  OmegaSpec bad;
  bad.r = 1;
  bad.periods = {5};  // not a pre period for g=4
  CHECK(code_of([&] { build_omega(bad, cell, data); }) == ErrorCode::BadArgument);
  OmegaSpec dup;
  dup.r = 2;
  dup.periods = {2, 2};
  CHECK(code_of([&] { build_omega(dup, CellIndex{4, 4, 2}, data); }) == ErrorCode::BadArgument);
}

TEST_CASE("pca omega matches an independent eigen-decomposition") {
  // g = 5: three pre-period changes (s = 2,3,4). Build comparison units with
  // a known covariance structure and compare the top principal direction.
  SimConfig config;
  config.n = 400;
  config.truth_ife = 1;
  config.seed = 77;
  const PanelDataset data = generate_panel(config, 0);
  const DiffPanel diffs = first_differences(data);

  CellIndex cell{5, 5, 1};
  OmegaSpec spec;
  spec.kind = OmegaKind::PrincipalComponents;
  spec.r = 1;
  const auto omega = build_omega(spec, cell, data);
  REQUIRE(omega.values.rows() == 3);
  REQUIRE(omega.values.cols() == 1);

  // Reference: eigen-decomposition of the centered comparison pre-diffs.
  std::vector<int> comp_units;
  for (int i = 0; i < data.n_units(); ++i)
    if (data.group(i) > 5) comp_units.push_back(i);
  Eigen::MatrixXd x(comp_units.size(), 3);
  for (std::size_t k = 0; k < comp_units.size(); ++k)
    x.row(k) = diffs.diffs.row(comp_units[k]).head(3);
  const Eigen::RowVector3d mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::Matrix3d cov = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d top = eig.eigenvectors().col(2);  // largest eigenvalue last
  // Apply the same sign rule: largest-magnitude entry positive.
  int arg = 0;
  for (int j = 1; j < 3; ++j)
    if (std::abs(top(j)) > std::abs(top(arg))) arg = j;
  if (top(arg) < 0) top = -top;
  CHECK((omega.values.col(0) - top).norm() < 1e-8);
}

TEST_CASE("pca omega rejects rank-deficient pre-periods") {
  // Noiseless panel with one factor: asking for two principal components
  // hits a zero second singular value.
  SimConfig config;
  config.n = 120;
  config.truth_ife = 1;
  config.sd_e = 0.0;
  config.sd_lambda = 1.0;
  const PanelDataset data = generate_panel(config, 0);
  OmegaSpec spec;
  spec.kind = OmegaKind::PrincipalComponents;
  spec.r = 2;
  CHECK(code_of([&] { build_omega(spec, CellIndex{5, 5, 2}, data); }) ==
        ErrorCode::RankDeficientOmega);
}

TEST_CASE("gamma_hat takes group means of the rotated pre-differences") {
  // Two comparison groups with constant outcomes per group; g=4, t=4, r=1.
  // Units: group 4 (treated), group 5, never. Outcomes chosen so the
  // rotated pre-difference (s=3 change) is 1.0 for group 5 and 2.0 for never.
  Eigen::MatrixXd y(6, 5);
  std::vector<int> g{4, 4, 5, 5, kNever, kNever};
  y.setZero();
  for (int i = 2; i < 4; ++i) y(i, 2) = y(i, 1) + 1.0;  // group 5: dY_3 = 1
  for (int i = 4; i < 6; ++i) y(i, 2) = y(i, 1) + 2.0;  // never:   dY_3 = 2
  // keep the panel balanced in later periods (values don't matter here)
  const PanelDataset data(y, g);
  const DiffPanel diffs = first_differences(data);
  OmegaSpec spec;
  spec.r = 1;
  CellIndex cell{4, 4, 1};
  const auto omega = build_omega(spec, cell, data);
  const auto gamma = gamma_hat(cell, omega, data, diffs);
  REQUIRE(gamma.comparison == std::vector<int>{5, kNever});
  REQUIRE(gamma.values.rows() == 2);
  REQUIRE(gamma.values.cols() == 2);
  CHECK(gamma.values(0, 0) == 1.0);
  CHECK(gamma.values(0, 1) == doctest::Approx(1.0));
  CHECK(gamma.values(1, 0) == 1.0);
  CHECK(gamma.values(1, 1) == doctest::Approx(2.0));

  const auto report = rank_diagnostic(gamma);
  CHECK(report.rank_ok);
  CHECK(report.sigma.size() == 2);
  CHECK(report.sigma(0) >= report.sigma(1));
}

TEST_CASE("rank diagnostic flags identical comparison groups") {
  Eigen::MatrixXd y(6, 5);
  std::vector<int> g{4, 4, 5, 5, kNever, kNever};
  y.setZero();
  // Both comparison groups get the same pre-trend: design rows collide.
  for (int i = 2; i < 6; ++i) y(i, 2) = y(i, 1) + 1.5;
  const PanelDataset data(y, g);
  const DiffPanel diffs = first_differences(data);
  OmegaSpec spec;
  spec.r = 1;
  CellIndex cell{4, 4, 1};
  const auto gamma = gamma_hat(cell, build_omega(spec, cell, data), data, diffs);
  const auto report = rank_diagnostic(gamma);
  CHECK(!report.rank_ok);
  CHECK(report.sigma_ratio < kRankTol);
}

TEST_CASE("rank diagnostic needs more rows than columns") {
  Eigen::MatrixXd y = Eigen::MatrixXd::Random(4, 6);
  std::vector<int> g{5, 5, kNever, kNever};
  const PanelDataset data(y, g);
  const DiffPanel diffs = first_differences(data);
  // r = 2 with a single comparison group (never): 1 row, 3 columns.
  OmegaSpec spec;
  spec.r = 2;
  CellIndex cell{5, 5, 2};
  const auto gamma = gamma_hat(cell, build_omega(spec, cell, data), data, diffs);
  CHECK(!rank_diagnostic(gamma).rank_ok);
}

TEST_CASE("trend-gap diagnostic separates factor trends from noise") {
  // One-factor DGP with distinct group loadings: pre-period gaps between
  // comparison groups are proportional to the factor changes.
  SimConfig config;
  config.n = 90;
  config.truth_ife = 1;
  config.sd_e = 0.0;
  config.exact_group_means = true;
  LatentRecord latents;
  const PanelDataset data = generate_panel(config, 3, &latents);
  const auto report = factor_count_diagnostic(data, 5, 5);
  CHECK(report.g == 5);
  CHECK(report.t == 5);
  REQUIRE(!report.gaps.empty());
  // Gap(g1,g2,s) = (lambda1_mean(g1) - lambda1_mean(g2)) * dF_s: the ratio
  // across periods s for a fixed pair equals the ratio of factor changes.
  const Eigen::VectorXd f1 = latents.factors.col(0);
  for (const auto& gap : report.gaps) {
    if (gap.s < 3) continue;
    // find the s=2 gap for the same pair
    for (const auto& base : report.gaps) {
      if (base.g1 == gap.g1 && base.g2 == gap.g2 && base.s == 2) {
        const double df_s = f1(gap.s - 1) - f1(gap.s - 2);
        const double df_2 = f1(1) - f1(0);
        CHECK(gap.gap * df_2 == doctest::Approx(base.gap * df_s).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("trend-gap diagnostic suggests more factors when pre-trends are flat") {
  // Hand-built: two comparison groups identical through t-1, split at t.
  const int n_per = 40;
  Eigen::MatrixXd y(3 * n_per, 5);
  std::vector<int> g;
  RngStream s(5, rng_tag::kGeneric, 9);
  for (int i = 0; i < 3 * n_per; ++i) {
    const int grp = i / n_per;  // 0: treated g=3, 1: group 4, 2: never
    g.push_back(grp == 0 ? 3 : (grp == 1 ? 4 : kNever));
    for (int t = 0; t < 5; ++t) {
      double v = 0.1 * s.next_normal();
      if (t == 2 && grp == 2) v += 5.0;  // never jumps at t=3 only
      y(i, t) = v;
    }
  }
  const PanelDataset data(y, g);
  const auto report = factor_count_diagnostic(data, 3, 3);
  CHECK(report.suggests_more_factors);

  CHECK(code_of([&] {
          // Only one comparison group left at t=4: no pairs to compare.
          factor_count_diagnostic(data, 3, 4);
        }) == ErrorCode::InsufficientComparisonGroups);
}
