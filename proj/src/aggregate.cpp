#include "staggered_ife/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "staggered_ife/errors.hpp"

namespace sife {

namespace {

void finish(AggregationResult& out, int n) {
  const double var = out.influence.squaredNorm() / n;
  out.se = std::sqrt(var / n);
}

// Influence of the ratio weight p_g / pi for the groups in `members`:
//   W_i(g) = (1{G_i=g} - p_g)/pi - (p_g/pi^2) * sum_{g' in members} (1{G_i=g'} - p_{g'})
// Mean-zero by construction; the second term is shared across g, so build the
// sum once.
struct ShareWeights {
  const PanelDataset& data;
  GroupShares shares;
  std::vector<int> members;
  double pi = 0.0;
  Eigen::VectorXd member_indicator_sum;  // sum over members of (1{G_i=g'} - p_{g'})

  ShareWeights(const PanelDataset& d, std::vector<int> m)
      : data(d), shares(group_shares(d)), members(std::move(m)) {
    for (int g : members) pi += shares.at(g);
    member_indicator_sum = Eigen::VectorXd::Zero(d.n_units());
    for (int g : members) {
      const double pg = shares.at(g);
      for (int i = 0; i < d.n_units(); ++i)
        member_indicator_sum(i) += (d.group(i) == g ? 1.0 : 0.0) - pg;
    }
  }

  double weight(int g) const { return shares.at(g) / pi; }

  Eigen::VectorXd influence(int g) const {
    const double pg = shares.at(g);
    Eigen::VectorXd w(data.n_units());
    for (int i = 0; i < data.n_units(); ++i)
      w(i) = ((data.group(i) == g ? 1.0 : 0.0) - pg) / pi -
             pg / (pi * pi) * member_indicator_sum(i);
    return w;
  }
};

const AttEstimate* find_cell(const std::vector<AttEstimate>& cells, int g, int t) {
  for (const auto& c : cells)
    if (c.cell.g == g && c.cell.t == t) return &c;
  return nullptr;
}

void require_influence(const AttEstimate& est) {
  if (est.influence.size() == 0)
    fail(ErrorCode::MissingCellEstimate,
         "cell " + cell_label(est.cell) + " has no influence attached; run inference first");
}

}  // namespace

std::string AggregationResult::label() const {
  switch (kind) {
    case AggregationKind::EventStudy: return "event(e=" + std::to_string(index) + ")";
    case AggregationKind::Group: return "group(g=" + std::to_string(index) + ")";
    case AggregationKind::Overall: return "overall";
  }
  return "?";
}

AggregationResult event_study(const std::vector<AttEstimate>& cells, const PanelDataset& data,
                              int e) {
  if (e < 0) fail(ErrorCode::BadArgument, "event time must be >= 0");
  AggregationResult out;
  out.kind = AggregationKind::EventStudy;
  out.index = e;

  std::vector<int> member_groups;
  std::vector<const AttEstimate*> member_cells;
  for (int g : data.treated_groups_present()) {
    if (const AttEstimate* est = find_cell(cells, g, g + e)) {
      require_influence(*est);
      member_groups.push_back(g);
      member_cells.push_back(est);
    } else {
      out.excluded.push_back({g, g + e, 0});
    }
  }
  if (member_groups.empty())
    fail(ErrorCode::EmptyEventTime, "no group reaches event time " + std::to_string(e));

  const ShareWeights sw(data, member_groups);
  out.influence = Eigen::VectorXd::Zero(data.n_units());
  for (std::size_t j = 0; j < member_groups.size(); ++j) {
    const double w = sw.weight(member_groups[j]);
    out.weights.emplace_back(member_cells[j]->cell, w);
    out.estimate += w * member_cells[j]->att;
    out.influence += w * member_cells[j]->influence +
                     member_cells[j]->att * sw.influence(member_groups[j]);
  }
  finish(out, data.n_units());
  return out;
}

AggregationResult group_average(const std::vector<AttEstimate>& cells, const PanelDataset& data,
                                int g) {
  AggregationResult out;
  out.kind = AggregationKind::Group;
  out.index = g;
  std::vector<const AttEstimate*> mine;
  for (const auto& c : cells)
    if (c.cell.g == g) mine.push_back(&c);
  if (mine.empty())
    fail(ErrorCode::GroupInfeasible, "group " + std::to_string(g) + " has no estimable cells");
  std::sort(mine.begin(), mine.end(),
            [](const AttEstimate* a, const AttEstimate* b) { return a->cell < b->cell; });
  const double w = 1.0 / static_cast<double>(mine.size());
  out.influence = Eigen::VectorXd::Zero(data.n_units());
  for (const AttEstimate* est : mine) {
    require_influence(*est);
    out.weights.emplace_back(est->cell, w);
    out.estimate += w * est->att;
    out.influence += w * est->influence;
  }
  finish(out, data.n_units());
  return out;
}

AggregationResult overall_average(const std::vector<AttEstimate>& cells, const PanelDataset& data) {
  AggregationResult out;
  out.kind = AggregationKind::Overall;

  std::vector<int> member_groups;
  std::vector<AggregationResult> per_group;
  for (int g : data.treated_groups_present()) {
    bool has_cell = false;
    for (const auto& c : cells)
      if (c.cell.g == g) has_cell = true;
    if (!has_cell) {
      out.excluded.push_back({g, 0, 0});
      continue;
    }
    member_groups.push_back(g);
    per_group.push_back(group_average(cells, data, g));
  }
  if (member_groups.empty()) fail(ErrorCode::NoFeasibleCells, "no group has estimable cells");

  const ShareWeights sw(data, member_groups);
  out.influence = Eigen::VectorXd::Zero(data.n_units());
  for (std::size_t j = 0; j < member_groups.size(); ++j) {
    const double w = sw.weight(member_groups[j]);
    out.estimate += w * per_group[j].estimate;
    out.influence +=
        w * per_group[j].influence + per_group[j].estimate * sw.influence(member_groups[j]);
    for (const auto& [cell, cw] : per_group[j].weights) out.weights.emplace_back(cell, w * cw);
  }
  finish(out, data.n_units());
  return out;
}

double reweight_external(const std::map<std::pair<int, int>, double>& external,
                         const AggregationResult& weights_from) {
  double total = 0.0;
  for (const auto& [cell, w] : weights_from.weights) {
    const auto it = external.find({cell.g, cell.t});
    if (it == external.end())
      fail(ErrorCode::MissingCellEstimate,
           "external estimates lack cell " + cell_label(cell));
    total += w * it->second;
  }
  return total;
}

}  // namespace sife
