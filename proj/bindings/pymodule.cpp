// Python bindings for the main operations: load a panel, estimate cells,
// aggregate, bootstrap, and run simulation configs. Thin wrappers — all the
// real logic lives in the C++ library.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "staggered_ife/aggregate.hpp"
#include "staggered_ife/errors.hpp"
#include "staggered_ife/identification.hpp"
#include "staggered_ife/inference.hpp"
#include "staggered_ife/panel.hpp"
#include "staggered_ife/pipeline.hpp"
#include "staggered_ife/simulate.hpp"
#include "staggered_ife/version.hpp"

namespace py = pybind11;

namespace {

sife::PanelDataset load_csv_text(const std::string& text, bool drop_g1) {
  std::istringstream in(text);
  sife::LoadOptions opts;
  opts.drop_first_period_treated = drop_g1;
  return sife::PanelDataset::load_csv(in, opts);
}

py::dict outcome_to_dict(const sife::CellOutcome& o) {
  py::dict d;
  d["g"] = o.cell.g;
  d["t"] = o.cell.t;
  d["ok"] = o.ok;
  if (o.ok) {
    d["att"] = o.est.att;
    d["se"] = o.est.se;
    d["theta_star"] = o.est.fit.theta_star;
    d["f_star"] = o.est.fit.f_star;
    d["influence"] = o.est.influence;
  } else {
    d["error"] = std::string(sife::error_code_name(o.code));
    d["message"] = o.message;
  }
  d["rank_ok"] = o.rank.rank_ok;
  d["sigma_ratio"] = o.rank.sigma_ratio;
  return d;
}

}  // namespace

PYBIND11_MODULE(_staggered_ife, m) {
  m.doc() = "group-time treatment effects under interactive fixed effects";
  m.attr("__version__") = sife::kVersion;

  py::register_exception<sife::Error>(m, "EstimationError");

  py::class_<sife::PanelDataset>(m, "Panel")
      .def_static("from_csv", &load_csv_text, py::arg("text"), py::arg("drop_g1") = false)
      .def_static(
          "from_csv_file",
          [](const std::string& path, bool drop_g1) {
            sife::LoadOptions opts;
            opts.drop_first_period_treated = drop_g1;
            return sife::PanelDataset::load_csv_file(path, opts);
          },
          py::arg("path"), py::arg("drop_g1") = false)
      .def_property_readonly("n", &sife::PanelDataset::n_units)
      .def_property_readonly("periods", &sife::PanelDataset::n_periods)
      .def_property_readonly("outcomes", [](const sife::PanelDataset& d) { return d.outcomes(); })
      .def_property_readonly("groups", [](const sife::PanelDataset& d) { return d.groups(); })
      .def("to_csv", [](const sife::PanelDataset& d) {
        std::ostringstream out;
        d.serialize_csv(out);
        return out.str();
      });

  m.def(
      "feasible_cells",
      [](const sife::PanelDataset& data, int r) {
        std::vector<std::pair<int, int>> out;
        for (const auto& c : sife::feasible_cells(data, r)) out.emplace_back(c.g, c.t);
        return out;
      },
      py::arg("panel"), py::arg("factors"));

  m.def(
      "estimate",
      [](const sife::PanelDataset& data, int r, const std::string& omega,
         const std::string& weight, bool keep_going) {
        sife::CellOptions options;
        options.r = r;
        options.omega = (omega == "pca") ? sife::OmegaKind::PrincipalComponents
                                         : sife::OmegaKind::LastBlock;
        options.weight = (weight == "two-step") ? sife::WeightMode::TwoStep
                                                : sife::WeightMode::Identity;
        const auto cells = sife::feasible_cells(data, r);
        const auto outcomes = sife::estimate_cells(data, cells, options, keep_going);
        py::list out;
        for (const auto& o : outcomes) out.append(outcome_to_dict(o));
        return out;
      },
      py::arg("panel"), py::arg("factors"), py::arg("omega") = "last-block",
      py::arg("weight") = "identity", py::arg("keep_going") = false);

  m.def(
      "aggregate",
      [](const sife::PanelDataset& data, int r, const std::string& kind, int index) {
        sife::CellOptions options;
        options.r = r;
        const auto cells = sife::feasible_cells(data, r);
        const auto outcomes = sife::estimate_cells(data, cells, options, false);
        std::vector<sife::AttEstimate> fitted;
        for (const auto& o : outcomes) fitted.push_back(o.est);
        sife::AggregationResult agg;
        if (kind == "event")
          agg = sife::event_study(fitted, data, index);
        else if (kind == "group")
          agg = sife::group_average(fitted, data, index);
        else
          agg = sife::overall_average(fitted, data);
        py::dict d;
        d["label"] = agg.label();
        d["estimate"] = agg.estimate;
        d["se"] = agg.se;
        d["influence"] = agg.influence;
        py::list w;
        for (const auto& [cell, weight] : agg.weights)
          w.append(py::make_tuple(cell.g, cell.t, weight));
        d["weights"] = w;
        return d;
      },
      py::arg("panel"), py::arg("factors"), py::arg("kind") = "overall", py::arg("index") = 0);

  m.def(
      "bootstrap_se",
      [](const sife::PanelDataset&, Eigen::MatrixXd influence, Eigen::VectorXd estimates, int draws,
         std::uint64_t seed, const std::string& law, int threads) {
        sife::InfluencePanel panel;
        panel.values = std::move(influence);
        panel.labels.resize(panel.values.cols());
        const auto mult = (law == "normal") ? sife::MultiplierLaw::Normal
                                            : sife::MultiplierLaw::Rademacher;
        const auto result =
            sife::multiplier_bootstrap(panel, estimates, draws, mult, seed, threads);
        std::vector<double> se;
        for (Eigen::Index k = 0; k < estimates.size(); ++k)
          se.push_back(sife::se_from_bootstrap(result, k));
        return se;
      },
      py::arg("panel"), py::arg("influence"), py::arg("estimates"), py::arg("draws"),
      py::arg("seed"), py::arg("law") = "rademacher", py::arg("threads") = 1);

  m.def(
      "simulate_panel",
      [](const std::string& config_json, int rep) {
        const auto config = sife::sim_config_from_json_text(config_json);
        const auto data = sife::generate_panel(config, rep);
        std::ostringstream out;
        data.serialize_csv(out);
        return out.str();
      },
      py::arg("config_json"), py::arg("rep") = 0);

  m.def(
      "run_monte_carlo",
      [](const std::string& config_json) {
        const auto config = sife::sim_config_from_json_text(config_json);
        const auto summary = sife::run_monte_carlo(config);
        py::list rows;
        for (const auto& row : summary.rows) {
          py::dict d;
          d["estimator"] = row.estimator;
          d["parameter"] = row.parameter;
          d["bias"] = row.bias;
          d["rmse"] = row.rmse;
          d["mad"] = row.mad;
          d["rej"] = row.rej;
          d["reps_used"] = row.reps_used;
          d["failures"] = row.failures;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config_json"));
}
