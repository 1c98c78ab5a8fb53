#include "staggered_ife/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "staggered_ife/errors.hpp"
#include "staggered_ife/format.hpp"

namespace sife {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

bool is_inf_token(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s == "inf" || s == "infinity";
}

}  // namespace

PanelDataset make_panel_with_labels(Eigen::MatrixXd outcomes, std::vector<int> groups,
                                    std::vector<std::int64_t> unit_ids,
                                    std::vector<std::int64_t> period_labels, int dropped) {
  PanelDataset d;
  d.outcomes_ = std::move(outcomes);
  d.groups_ = std::move(groups);
  d.unit_ids_ = std::move(unit_ids);
  d.period_labels_ = std::move(period_labels);
  d.dropped_units_ = dropped;
  d.validate();
  d.index_groups();
  return d;
}

PanelDataset::PanelDataset(Eigen::MatrixXd outcomes, std::vector<int> groups)
    : outcomes_(std::move(outcomes)), groups_(std::move(groups)) {
  unit_ids_.resize(static_cast<std::size_t>(outcomes_.rows()));
  for (std::size_t i = 0; i < unit_ids_.size(); ++i) unit_ids_[i] = static_cast<std::int64_t>(i);
  period_labels_.resize(static_cast<std::size_t>(outcomes_.cols()));
  for (std::size_t t = 0; t < period_labels_.size(); ++t)
    period_labels_[t] = static_cast<std::int64_t>(t + 1);
  validate();
  index_groups();
}

void PanelDataset::validate() const {
  const int n = static_cast<int>(outcomes_.rows());
  const int t_count = static_cast<int>(outcomes_.cols());
  if (n == 0) fail(ErrorCode::EmptyDataset, "panel has no units");
  if (t_count < 2) fail(ErrorCode::MalformedInput, "panel needs at least 2 periods");
  if (static_cast<int>(groups_.size()) != n)
    fail(ErrorCode::LengthMismatch, "groups length != number of units");
  for (int i = 0; i < n; ++i) {
    const int g = groups_[i];
    if (is_never(g)) continue;
    if (g == 1)
      fail(ErrorCode::FirstPeriodTreated,
           "unit " + std::to_string(unit_ids_.empty() ? i : unit_ids_[i]) +
               " is treated in the first period; no pre-period exists");
    if (g < 1)
      fail(ErrorCode::MalformedInput, "group < first period for unit index " + std::to_string(i));
    if (g > t_count)
      fail(ErrorCode::GroupOutOfRange,
           "group " + std::to_string(g) + " exceeds last period " + std::to_string(t_count));
  }
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_count; ++t)
      if (!std::isfinite(outcomes_(i, t)))
        fail(ErrorCode::MalformedInput, "non-finite outcome at unit index " + std::to_string(i));
}

void PanelDataset::index_groups() {
  std::map<int, std::vector<int>> buckets;
  for (int i = 0; i < n_units(); ++i) buckets[groups_[i]].push_back(i);
  by_group_.assign(buckets.begin(), buckets.end());
}

std::vector<int> PanelDataset::groups_present() const {
  std::vector<int> out;
  out.reserve(by_group_.size());
  for (const auto& [g, units] : by_group_) out.push_back(g);
  return out;  // map order: ascending, kNever (INT_MAX) last
}

std::vector<int> PanelDataset::treated_groups_present() const {
  std::vector<int> out = groups_present();
  while (!out.empty() && is_never(out.back())) out.pop_back();
  return out;
}

bool PanelDataset::has_never_treated() const {
  return !by_group_.empty() && is_never(by_group_.back().first);
}

int PanelDataset::group_count(int g) const {
  for (const auto& [gg, units] : by_group_)
    if (gg == g) return static_cast<int>(units.size());
  return 0;
}

const std::vector<int>& PanelDataset::units_in_group(int g) const {
  for (const auto& [gg, units] : by_group_)
    if (gg == g) return units;
  static const std::vector<int> empty;
  return empty;
}

PanelDataset PanelDataset::load_csv_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MalformedInput, "cannot open " + path);
  return load_csv(in, opts);
}

PanelDataset PanelDataset::load_csv(std::istream& in, const LoadOptions& opts) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyDataset, "empty input");
  {
    const auto header = split_csv_line(line);
    if (header.size() != 4 || header[0] != "unit" || header[1] != "period" ||
        header[2] != "outcome" || header[3] != "group")
      fail(ErrorCode::MalformedInput, "expected header unit,period,outcome,group");
  }

  struct UnitRec {
    bool group_set = false;
    bool never = false;
    std::int64_t group_label = 0;
    std::map<std::int64_t, double> obs;  // period label -> outcome
  };
  std::map<std::int64_t, UnitRec> units;  // ordered by unit id
  std::map<std::int64_t, int> period_set;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4)
      fail(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": expected 4 fields");
    std::int64_t unit, period;
    double outcome;
    if (!parse_i64(f[0], unit) || !parse_i64(f[1], period) || !parse_f64(f[2], outcome))
      fail(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": bad unit/period/outcome");
    if (!std::isfinite(outcome))
      fail(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": non-finite outcome");
    UnitRec& rec = units[unit];
    if (!rec.obs.emplace(period, outcome).second)
      fail(ErrorCode::MalformedInput,
           "line " + std::to_string(line_no) + ": duplicate (unit,period)");
    period_set[period] = 1;
    bool never = false;
    std::int64_t glabel = 0;
    if (is_inf_token(f[3])) {
      never = true;
    } else if (!parse_i64(f[3], glabel)) {
      fail(ErrorCode::MalformedInput,
           "line " + std::to_string(line_no) + ": group must be an integer or inf");
    }
    if (rec.group_set) {
      if (rec.never != never || (!never && rec.group_label != glabel))
        fail(ErrorCode::MalformedInput,
             "unit " + std::to_string(unit) + ": inconsistent group across rows");
    } else {
      rec.group_set = true;
      rec.never = never;
      rec.group_label = glabel;
    }
  }
  if (units.empty()) fail(ErrorCode::EmptyDataset, "no data rows");

  std::vector<std::int64_t> periods;
  periods.reserve(period_set.size());
  for (const auto& [p, one] : period_set) periods.push_back(p);
  const int t_count = static_cast<int>(periods.size());
  if (t_count < 2) fail(ErrorCode::MalformedInput, "panel needs at least 2 periods");

  // Balanced-panel check: every unit must cover every observed period.
  for (const auto& [unit, rec] : units) {
    if (static_cast<int>(rec.obs.size()) == t_count) continue;
    for (std::int64_t p : periods)
      if (!rec.obs.count(p))
        fail(ErrorCode::MissingCell,
             "unit " + std::to_string(unit) + " has no row for period " + std::to_string(p));
  }

  // Map group labels onto the 1..T period index; decide who is first-period
  // treated (mapped g <= 1) and either drop or reject them.
  auto map_group = [&](std::int64_t label, std::int64_t unit) -> int {
    const auto it = std::lower_bound(periods.begin(), periods.end(), label);
    if (it != periods.end() && *it == label)
      return static_cast<int>(it - periods.begin()) + 1;
    if (label > periods.back())
      fail(ErrorCode::GroupOutOfRange, "unit " + std::to_string(unit) + ": group " +
                                           std::to_string(label) + " is after the last period");
    if (label < periods.front()) return 0;  // treated before the sample started
    fail(ErrorCode::MalformedInput, "unit " + std::to_string(unit) + ": group " +
                                        std::to_string(label) + " is not an observed period");
  };

  std::vector<std::int64_t> kept_ids;
  std::vector<int> kept_groups;
  int dropped = 0;
  for (const auto& [unit, rec] : units) {
    int g = kNever;
    if (!rec.never) g = map_group(rec.group_label, unit);
    if (!is_never(g) && g <= 1) {
      if (opts.drop_first_period_treated) {
        ++dropped;
        continue;
      }
      fail(ErrorCode::FirstPeriodTreated,
           "unit " + std::to_string(unit) + " is treated from the first observed period on "
           "(re-run with drop_first_period_treated to exclude such units)");
    }
    kept_ids.push_back(unit);
    kept_groups.push_back(g);
  }
  if (kept_ids.empty()) fail(ErrorCode::EmptyDataset, "all units dropped");

  Eigen::MatrixXd y(static_cast<Eigen::Index>(kept_ids.size()), t_count);
  for (std::size_t i = 0; i < kept_ids.size(); ++i) {
    const UnitRec& rec = units[kept_ids[i]];
    int t = 0;
    for (std::int64_t p : periods) y(static_cast<Eigen::Index>(i), t++) = rec.obs.at(p);
  }
  return make_panel_with_labels(std::move(y), std::move(kept_groups), std::move(kept_ids),
                                std::move(periods), dropped);
}

void PanelDataset::serialize_csv(std::ostream& out) const {
  out << "unit,period,outcome,group\n";
  for (int i = 0; i < n_units(); ++i) {
    std::string glabel = "inf";
    if (!is_never(groups_[i])) glabel = std::to_string(period_labels_[groups_[i] - 1]);
    for (int t = 0; t < n_periods(); ++t) {
      out << unit_ids_[i] << ',' << period_labels_[t] << ',' << format_double(outcomes_(i, t))
          << ',' << glabel << '\n';
    }
  }
}

DiffPanel first_differences(const PanelDataset& data) {
  const int t_count = data.n_periods();
  DiffPanel d;
  d.diffs.resize(data.n_units(), t_count - 1);
  for (int t = 2; t <= t_count; ++t)
    d.diffs.col(t - 2) = data.outcomes().col(t - 1) - data.outcomes().col(t - 2);
  return d;
}

GroupShares group_shares(const PanelDataset& data) {
  GroupShares s;
  const double n = data.n_units();
  for (int g : data.groups_present())
    s.shares.emplace_back(g, static_cast<double>(data.group_count(g)) / n);
  return s;
}

double GroupShares::at(int g) const {
  for (const auto& [gg, p] : shares)
    if (gg == g) return p;
  fail(ErrorCode::BadArgument, "group " + (is_never(g) ? std::string("inf") : std::to_string(g)) +
                                   " not present in panel");
}

double GroupShares::sum() const {
  double total = 0.0;
  for (const auto& [g, p] : shares) total += p;
  return total;
}

}  // namespace sife
