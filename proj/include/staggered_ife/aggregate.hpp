#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "staggered_ife/estimator.hpp"

namespace sife {

enum class AggregationKind { EventStudy, Group, Overall };

// A weighted combination of cell estimates together with its influence
// function. Weights are reported so any aggregate can be rebuilt from the
// cell table (see reweight_external). The influence includes the contribution
// of estimating the group-share weights themselves, not just the cells.
struct AggregationResult {
  AggregationKind kind = AggregationKind::Overall;
  int index = 0;  // event time e, or group g; unused for Overall
  double estimate = 0.0;
  double se = 0.0;
  Eigen::VectorXd influence;                       // length n, mean ~0
  std::vector<std::pair<CellIndex, double>> weights;
  std::vector<CellIndex> excluded;                 // requested but infeasible combos
  std::string label() const;
};

// Average effect e periods after treatment start, over the groups for which
// the (g, g+e) cell exists, weighted by group share. Throws EmptyEventTime
// when no group reaches event time e.
AggregationResult event_study(const std::vector<AttEstimate>& cells, const PanelDataset& data,
                              int e);

// Equal-weight average over the available periods t = g..t_max for one group.
// Throws GroupInfeasible when the group has no cells.
AggregationResult group_average(const std::vector<AttEstimate>& cells, const PanelDataset& data,
                                int g);

// Share-weighted average of the per-group averages over all groups with at
// least one cell.
AggregationResult overall_average(const std::vector<AttEstimate>& cells, const PanelDataset& data);

// Apply an aggregation's weights to cell estimates produced elsewhere (e.g. a
// robustness pass with a different omega). Throws MissingCellEstimate if a
// weighted cell is absent.
double reweight_external(const std::map<std::pair<int, int>, double>& external,
                         const AggregationResult& weights_from);

}  // namespace sife
