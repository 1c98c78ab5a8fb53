#include "staggered_ife/pipeline.hpp"

#include "staggered_ife/errors.hpp"

namespace sife {

std::vector<CellOutcome> estimate_cells(const PanelDataset& data,
                                        const std::vector<CellIndex>& cells,
                                        const CellOptions& options, bool keep_going) {
  const DiffPanel diffs = first_differences(data);
  std::vector<CellOutcome> out;
  out.reserve(cells.size());
  for (const CellIndex& cell : cells) {
    CellOutcome res;
    res.cell = cell;
    try {
      OmegaSpec spec;
      spec.kind = options.omega;
      spec.r = options.r;
      spec.periods = options.omega_periods;
      const OmegaMatrix omega = build_omega(spec, cell, data);
      const DiffPanel* dp = &diffs;
      const GammaHat gamma = gamma_hat(cell, omega, data, *dp);
      res.rank = rank_diagnostic(gamma, options.rank_tol);
      if (!res.rank.rank_ok)
        fail(ErrorCode::SingularDesign,
             "cell " + cell_label(cell) +
                 ": moment design is rank deficient (sigma ratio " +
                 std::to_string(res.rank.sigma_ratio) +
                 "); the comparison groups cannot identify " + std::to_string(options.r) +
                 " factor(s)");
      const Eigen::MatrixXd w = make_weight(cell, omega, data, *dp, options.weight);
      const GmmFit fit = estimate_delta_star(cell, omega, data, *dp, w);
      res.est = estimate_attgt(cell, fit, data, *dp);
      attach_influence(res.est, data, *dp);
      res.ok = true;
    } catch (const Error& err) {
      if (!keep_going) throw;
      res.ok = false;
      res.code = err.code();
      res.message = err.what();
    }
    out.push_back(std::move(res));
  }
  return out;
}

std::vector<AttEstimate> estimate_cells_strict(const PanelDataset& data,
                                               const std::vector<CellIndex>& cells,
                                               const CellOptions& options) {
  auto outcomes = estimate_cells(data, cells, options, /*keep_going=*/false);
  std::vector<AttEstimate> out;
  out.reserve(outcomes.size());
  for (auto& o : outcomes) out.push_back(std::move(o.est));
  return out;
}

}  // namespace sife
