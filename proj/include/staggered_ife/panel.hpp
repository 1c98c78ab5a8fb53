#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace sife {

// Sentinel for never-treated units. Deliberately INT_MAX rather than 0 or
// T+1: it can never collide with a valid period index, and it sorts after
// every treated group, which is exactly the ordering comparison sets need.
inline constexpr int kNever = std::numeric_limits<int>::max();

inline bool is_never(int g) { return g == kNever; }

struct LoadOptions {
  // Drop units first treated in (or before) the first observed period instead
  // of rejecting the dataset. The number of dropped units is recorded here
  // after the load.
  bool drop_first_period_treated = false;
};

// Balanced panel in wide form. Row i = unit, column t-1 = period t after
// re-indexing periods to 1..T. Groups hold the first treated period on the
// same 1..T scale, or kNever.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(Eigen::MatrixXd outcomes, std::vector<int> groups);

  int n_units() const { return static_cast<int>(outcomes_.rows()); }
  int n_periods() const { return static_cast<int>(outcomes_.cols()); }

  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  double outcome(int unit, int period) const { return outcomes_(unit, period - 1); }
  const std::vector<int>& groups() const { return groups_; }
  int group(int unit) const { return groups_[unit]; }

  // Distinct groups, ascending, never-treated last (kNever sorts naturally).
  std::vector<int> groups_present() const;
  std::vector<int> treated_groups_present() const;
  bool has_never_treated() const;

  int group_count(int g) const;
  const std::vector<int>& units_in_group(int g) const;

  // Original labels, kept so serialization round-trips. Synthetic panels get
  // units 0..n-1 and periods 1..T.
  const std::vector<std::int64_t>& unit_ids() const { return unit_ids_; }
  const std::vector<std::int64_t>& period_labels() const { return period_labels_; }
  int dropped_first_period_units() const { return dropped_units_; }

  // CSV with header unit,period,outcome,group; group is a period label or
  // "inf". Outcomes are written in shortest round-trip form, so
  // load(serialize(load(x))) is bit-exact.
  static PanelDataset load_csv(std::istream& in, const LoadOptions& opts = {});
  static PanelDataset load_csv_file(const std::string& path, const LoadOptions& opts = {});
  void serialize_csv(std::ostream& out) const;

 private:
  Eigen::MatrixXd outcomes_;
  std::vector<int> groups_;
  std::vector<std::int64_t> unit_ids_;
  std::vector<std::int64_t> period_labels_;
  int dropped_units_ = 0;
  // group -> unit indices, built once
  std::vector<std::pair<int, std::vector<int>>> by_group_;
  void index_groups();
  void validate() const;
  friend PanelDataset make_panel_with_labels(Eigen::MatrixXd, std::vector<int>,
                                             std::vector<std::int64_t>, std::vector<std::int64_t>,
                                             int);
};

// First differences: column j holds period (j+2) minus period (j+1), i.e.
// the change observed at t = j+2. Unit effects drop out here.
struct DiffPanel {
  Eigen::MatrixXd diffs;  // n x (T-1)
  // Change at period t (t in 2..T).
  Eigen::VectorXd at(int t) const { return diffs.col(t - 2); }
};

DiffPanel first_differences(const PanelDataset& data);

// Empirical group shares over the full sample (treated groups + never).
struct GroupShares {
  std::vector<std::pair<int, double>> shares;  // ascending, never last
  double at(int g) const;
  double sum() const;
};

GroupShares group_shares(const PanelDataset& data);

}  // namespace sife
