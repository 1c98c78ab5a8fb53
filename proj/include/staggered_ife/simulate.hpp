#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "staggered_ife/aggregate.hpp"
#include "staggered_ife/pipeline.hpp"

namespace sife {

enum class NoiseLaw { Normal, Uniform };

struct EstimatorSpec {
  enum class Kind { Staggered, Levels, Did, LinearTrends };
  Kind kind = Kind::Staggered;
  int r = 0;  // factors removed; used by Staggered only
  std::string label() const;
};

EstimatorSpec estimator_spec_from_string(const std::string& s);

struct ParamSpec {
  enum class Kind { Overall, EventStudy };
  Kind kind = Kind::Overall;
  int e = 0;
  std::string label() const;
};

ParamSpec param_spec_from_string(const std::string& s);

// Data-generating process for the benchmark designs: outcomes are
//   Y_it = theta_t + eta_i + lambda_i' F_t + u_it  (+ tau on treated cells)
// with group means of the loadings following the benchmark ladders
//   mean lambda_1 = 1 + slope1 * g,  mean lambda_2 = 1 - 5 g,
//   mean lambda_3 = 5 - 10 g,        eta mean      = h * g,
// where g is the group's numeric code (never-treated units use never_code,
// default 0) and slope1 defaults to 2 (the slope sweep sets it to l).
// truth_ife picks how much heterogeneity is switched on: -1 none, 0 additive
// only (h=1, no factors), k>=1 turns on the first k factor columns.
struct SimConfig {
  int n = 1000;
  int periods = 8;
  std::vector<int> treated_groups = {5, 6, 7, 8};
  bool include_never = true;
  int truth_ife = 0;  // -1, 0, 1, 2, 3
  double rho = 0.2;   // loading on the observed covariates inside lambda
  std::optional<double> lambda1_slope;  // default 2; the "l" sweep
  double sd_eta = 0.1;
  double sd_lambda = 1.0;
  double sd_e = 1.0;
  NoiseLaw e_law = NoiseLaw::Normal;
  double never_code = 0.0;
  std::optional<double> het_slope;  // override for h (default 0 if truth=-1 else 1)
  std::vector<double> theta;        // length periods; default all zero
  double tau = 0.0;                 // injected true effect on treated cells
  bool exact_group_means = false;   // force group means of latents onto the ladder
  std::optional<Eigen::MatrixXd> factor_override;        // periods x 3
  std::map<int, Eigen::Vector3d> loading_mean_override;  // group (kNever ok) -> means
  int reps = 1000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware
  std::vector<EstimatorSpec> estimators = {{EstimatorSpec::Kind::Staggered, 0}};
  std::vector<ParamSpec> parameters = {{ParamSpec::Kind::Overall, 0}};
  OmegaKind omega = OmegaKind::LastBlock;
  WeightMode weight = WeightMode::Identity;
};

// JSON round-trip for config files (keys mirror the field names; see README).
SimConfig sim_config_from_json_text(const std::string& text);
std::string sim_config_to_json_text(const SimConfig& config);

// Everything the DGP drew, for oracle checks: effective factors (periods x 3),
// per-unit latents, and the exact per-group loading means.
struct LatentRecord {
  Eigen::VectorXd theta;
  Eigen::MatrixXd factors;  // periods x 3, inactive columns zero
  Eigen::MatrixXd lambda;   // n x 3
  Eigen::VectorXd eta;
  std::map<int, Eigen::Vector3d> group_loading_means;
  double het_slope = 0.0;
};

PanelDataset generate_panel(const SimConfig& config, std::uint64_t rep,
                            LatentRecord* latents = nullptr);

// Comparator estimators evaluated on the same cells, with delta-method
// influence functions so their rejection rates are as real as the main path.
//
// Levels: difference of period-t means, treated vs the simple average of the
// not-yet-treated groups (no differencing at all).
std::vector<AttEstimate> estimator_levels(const PanelDataset& data,
                                          const std::vector<CellIndex>& cells);
// Did: the r = 0 special case of the main estimator.
std::vector<AttEstimate> estimator_did(const PanelDataset& data,
                                       const std::vector<CellIndex>& cells);
// LinearTrends: two-way fixed effects plus unit-specific linear trends fitted
// on untreated cells, treated outcomes imputed, effects averaged.
std::vector<AttEstimate> estimator_linear_trends(const PanelDataset& data,
                                                 const std::vector<CellIndex>& cells);

// Per-rep record for one (estimator, parameter) pair.
struct McDraw {
  double est = 0.0;
  double se = 0.0;
  bool ok = false;
};

struct McRow {
  std::string estimator;
  std::string parameter;
  double bias = 0.0;
  double rmse = 0.0;
  double mad = 0.0;
  double rej = 0.0;  // NaN when no rep had a usable se
  int reps_used = 0;
  int failures = 0;
  int rej_reps = 0;  // reps entering the rejection rate (se > 0)
  std::vector<McDraw> draws;  // one per rep
};

struct McSummary {
  SimConfig config;
  std::vector<McRow> rows;  // estimator-major, parameter-minor
};

McSummary run_monte_carlo(const SimConfig& config);

// Benchmark presets: one config per truth design (columns of the summary
// tables). Labels name the amount of unobserved heterogeneity in the truth.
struct PresetRun {
  std::string truth_label;
  SimConfig config;
};

std::vector<PresetRun> preset_table1(int n, int reps, std::uint64_t seed);
std::vector<PresetRun> preset_table2(int n, int reps, std::uint64_t seed);

// Noiseless designs that violate the two identification requirements, for
// diagnostic tests: factor one makes the pre-period factor block rank
// deficient (second factor collinear with the first); loading one puts every
// group's loading means on an (r-1)-dimensional affine subspace so the
// comparison design loses a column of rank.
SimConfig degenerate_factor_config(std::uint64_t seed);
SimConfig degenerate_loading_config(int r, std::uint64_t seed);

}  // namespace sife
