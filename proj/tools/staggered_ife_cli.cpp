// Command-line front end: estimate effects from a panel CSV, run the
// benchmark simulations, or print identification diagnostics. Validation
// problems exit 2, estimation failures exit 3, success exits 0.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "staggered_ife/aggregate.hpp"
#include "staggered_ife/errors.hpp"
#include "staggered_ife/format.hpp"
#include "staggered_ife/identification.hpp"
#include "staggered_ife/inference.hpp"
#include "staggered_ife/panel.hpp"
#include "staggered_ife/pipeline.hpp"
#include "staggered_ife/report.hpp"
#include "staggered_ife/rng.hpp"
#include "staggered_ife/simulate.hpp"
#include "staggered_ife/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const sife::Error& e) {
  return sife::is_validation_error(e.code()) ? 2 : 3;
}

std::string comment_line(const std::string& run_id) {
  return std::string("# ") + sife::kToolName + " " + sife::kVersion + " run " + run_id + "\n";
}

std::string group_label(int g) { return sife::is_never(g) ? "inf" : std::to_string(g); }

double p_value(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

json cell_json(const sife::CellOutcome& outcome, double se, const std::string& se_source) {
  json j;
  j["g"] = outcome.cell.g;
  j["t"] = outcome.cell.t;
  if (!outcome.ok) {
    j["status"] = "failed";
    j["error"] = sife::error_code_name(outcome.code);
    j["message"] = outcome.message;
  } else {
    const sife::AttEstimate& est = outcome.est;
    j["status"] = "ok";
    j["att"] = est.att;
    j["se"] = se;
    j["se_source"] = se_source;
    j["ci_low"] = est.att - sife::kZ975 * se;
    j["ci_high"] = est.att + sife::kZ975 * se;
    const double z = (se > 0.0) ? est.att / se : std::numeric_limits<double>::quiet_NaN();
    j["z"] = z;
    j["p"] = (se > 0.0) ? p_value(z) : std::numeric_limits<double>::quiet_NaN();
    j["theta_star"] = est.fit.theta_star;
    j["f_star"] = std::vector<double>(est.fit.f_star.data(),
                                      est.fit.f_star.data() + est.fit.f_star.size());
    j["moment_values"] = std::vector<double>(
        est.fit.moment_values.data(), est.fit.moment_values.data() + est.fit.moment_values.size());
    json comp = json::array();
    for (int g : est.fit.gamma.comparison) comp.push_back(group_label(g));
    j["comparison"] = comp;
    if (est.fit.omega.kind == sife::OmegaKind::PrincipalComponents)
      j["se_note"] = "pca omega: no correction for Omega estimation";
  }
  json rank;
  if (outcome.rank.sigma.size() > 0) {
    rank["rank_ok"] = outcome.rank.rank_ok;
    rank["singular_values"] = std::vector<double>(
        outcome.rank.sigma.data(), outcome.rank.sigma.data() + outcome.rank.sigma.size());
    rank["condition"] = outcome.rank.condition;
    rank["sigma_ratio"] = outcome.rank.sigma_ratio;
  }
  j["rank"] = rank;
  return j;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string data_path;
  int factors = 0;
  std::string omega = "last-block";
  std::vector<int> omega_periods;
  std::string weight = "identity";
  std::string cells = "all";
  std::string aggregate = "none";
  int bootstrap = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mult = "rademacher";
  int threads = 0;
  std::string out_dir = ".";
  bool keep_going = false;
  bool drop_g1 = false;
};

json estimate_options_json(const EstimateArgs& a) {
  json o;
  o["data"] = a.data_path;
  o["factors"] = a.factors;
  o["omega"] = a.omega;
  o["omega_periods"] = a.omega_periods;
  o["weight"] = a.weight;
  o["cells"] = a.cells;
  o["aggregate"] = a.aggregate;
  o["bootstrap"] = a.bootstrap;
  o["seed"] = a.seed;
  o["mult"] = a.mult;
  o["threads"] = a.threads;
  o["keep_going"] = a.keep_going;
  o["drop_g1"] = a.drop_g1;
  return o;
}

std::vector<sife::CellIndex> select_cells(const std::string& spec, int factors, bool keep_going,
                                          const std::vector<sife::CellIndex>& feasible) {
  if (spec == "all") return feasible;
  std::vector<sife::CellIndex> chosen;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    if (tok.empty()) continue;
    int g = 0, t = 0;
    if (std::sscanf(tok.c_str(), "%d,%d", &g, &t) != 2)
      sife::fail(sife::ErrorCode::BadArgument, "--cells: expected g,t pairs separated by ';'");
    bool found = false;
    for (const auto& c : feasible)
      if (c.g == g && c.t == t) {
        chosen.push_back(c);
        found = true;
      }
    if (!found) {
      // Strict runs refuse up front; --keep-going forwards the cell so it
      // shows up in the output with its own error row.
      if (!keep_going)
        sife::fail(sife::ErrorCode::BadArgument,
                   "--cells: (" + std::to_string(g) + "," + std::to_string(t) +
                       ") is not a feasible cell at this factor count");
      chosen.push_back(sife::CellIndex{g, t, factors});
    }
  }
  if (chosen.empty()) sife::fail(sife::ErrorCode::BadArgument, "--cells: empty selection");
  return chosen;
}

int run_estimate(const EstimateArgs& args) {
  if (args.bootstrap > 0 && !args.seed_set)
    sife::fail(sife::ErrorCode::BadArgument, "--bootstrap requires --seed");
  if (args.factors < 0) sife::fail(sife::ErrorCode::BadArgument, "--factors must be >= 0");

  sife::LoadOptions load;
  load.drop_first_period_treated = args.drop_g1;
  const sife::PanelDataset data = sife::PanelDataset::load_csv_file(args.data_path, load);
  if (data.dropped_first_period_units() > 0)
    std::cerr << "note: dropped " << data.dropped_first_period_units()
              << " unit(s) treated from the first observed period\n";

  const auto feasible = sife::feasible_cells(data, args.factors);
  const auto cells = select_cells(args.cells, args.factors, args.keep_going, feasible);

  sife::CellOptions options;
  options.r = args.factors;
  options.omega = (args.omega == "pca") ? sife::OmegaKind::PrincipalComponents
                                        : sife::OmegaKind::LastBlock;
  options.omega_periods = args.omega_periods;
  options.weight =
      (args.weight == "two-step") ? sife::WeightMode::TwoStep : sife::WeightMode::Identity;

  const auto outcomes = sife::estimate_cells(data, cells, options, args.keep_going);

  // Aggregates over the cells that fit.
  std::vector<sife::AttEstimate> fitted;
  for (const auto& o : outcomes)
    if (o.ok) fitted.push_back(o.est);
  std::vector<sife::AggregationResult> aggregates;
  if (args.aggregate != "none" && !fitted.empty()) {
    if (args.aggregate == "event") {
      std::set<int> horizons;
      for (const auto& est : fitted) horizons.insert(est.cell.t - est.cell.g);
      for (int e : horizons) aggregates.push_back(sife::event_study(fitted, data, e));
    } else if (args.aggregate == "group") {
      std::set<int> gs;
      for (const auto& est : fitted) gs.insert(est.cell.g);
      for (int g : gs) aggregates.push_back(sife::group_average(fitted, data, g));
    } else if (args.aggregate == "overall") {
      aggregates.push_back(sife::overall_average(fitted, data));
    } else {
      sife::fail(sife::ErrorCode::BadArgument,
                 "--aggregate must be none, event, group or overall");
    }
  }

  // One joint multiplier bootstrap across cells and aggregates.
  std::string se_source = "analytic";
  std::map<const void*, double> boot_se;  // keyed by address of est/aggregate
  sife::SupTBand band;
  bool have_band = false;
  if (args.bootstrap > 0 && !fitted.empty()) {
    se_source = "bootstrap";
    std::vector<std::string> labels;
    std::vector<Eigen::VectorXd> columns;
    Eigen::VectorXd estimates(fitted.size() + aggregates.size());
    Eigen::Index k = 0;
    for (const auto& est : fitted) {
      labels.push_back("att" + sife::cell_label(est.cell));
      columns.push_back(est.influence);
      estimates(k++) = est.att;
    }
    for (const auto& agg : aggregates) {
      labels.push_back(agg.label());
      columns.push_back(agg.influence);
      estimates(k++) = agg.estimate;
    }
    const auto panel = sife::stack_influence(labels, columns);
    const auto law = (args.mult == "normal") ? sife::MultiplierLaw::Normal
                                             : sife::MultiplierLaw::Rademacher;
    const auto boot = sife::multiplier_bootstrap(panel, estimates, args.bootstrap, law, args.seed,
                                                 args.threads <= 0 ? 1 : args.threads);
    int idx = 0;
    for (const auto& est : fitted) boot_se[&est] = sife::se_from_bootstrap(boot, idx++);
    for (const auto& agg : aggregates) boot_se[&agg] = sife::se_from_bootstrap(boot, idx++);
    band = sife::sup_t_band(boot);
    have_band = true;
  }

  auto se_of_cell = [&](const sife::AttEstimate& est) {
    const auto it = boot_se.find(&est);
    return it == boot_se.end() ? est.se : it->second;
  };
  auto se_of_agg = [&](const sife::AggregationResult& agg) {
    const auto it = boot_se.find(&agg);
    return it == boot_se.end() ? agg.se : it->second;
  };

  const std::string digest = sife::file_digest_hex(args.data_path);
  const sife::RunManifest manifest =
      sife::make_manifest("estimate", estimate_options_json(args), digest, args.seed);

  fs::create_directories(args.out_dir);
  // cells.csv
  {
    std::ostringstream csv;
    csv << comment_line(manifest.run_id);
    csv << "g,t,att,se,ci_low,ci_high,z,p,rank_ok,sigma_ratio,status,error\n";
    std::size_t fit_idx = 0;
    for (const auto& o : outcomes) {
      if (o.ok) {
        const auto& est = fitted[fit_idx++];
        const double se = se_of_cell(est);
        const double z = se > 0 ? est.att / se : std::numeric_limits<double>::quiet_NaN();
        csv << o.cell.g << ',' << o.cell.t << ',' << sife::format_double(est.att) << ','
            << sife::format_double(se) << ','
            << sife::format_double(est.att - sife::kZ975 * se) << ','
            << sife::format_double(est.att + sife::kZ975 * se) << ',' << sife::format_double(z)
            << ',' << sife::format_double(se > 0 ? p_value(z) : std::numeric_limits<double>::quiet_NaN())
            << ',' << (o.rank.rank_ok ? "true" : "false") << ','
            << sife::format_double(o.rank.sigma_ratio) << ",ok,\n";
      } else {
        csv << o.cell.g << ',' << o.cell.t << ",nan,nan,nan,nan,nan,nan,"
            << (o.rank.sigma.size() > 0 && o.rank.rank_ok ? "true" : "false") << ','
            << sife::format_double(o.rank.sigma.size() > 0 ? o.rank.sigma_ratio
                                                           : std::numeric_limits<double>::quiet_NaN())
            << ",failed," << sife::error_code_name(o.code) << '\n';
      }
    }
    sife::write_text_file((fs::path(args.out_dir) / "cells.csv").string(), csv.str());
  }
  // cells.json
  {
    json j;
    j["run_id"] = manifest.run_id;
    j["manifest"] = sife::manifest_to_json(manifest);
    json cell_list = json::array();
    std::size_t fit_idx = 0;
    for (const auto& o : outcomes) {
      double se = 0.0;
      if (o.ok) se = se_of_cell(fitted[fit_idx++]);
      cell_list.push_back(cell_json(o, se, se_source));
    }
    j["cells"] = cell_list;
    json agg_list = json::array();
    for (std::size_t a = 0; a < aggregates.size(); ++a) {
      const auto& agg = aggregates[a];
      json ja;
      ja["label"] = agg.label();
      ja["kind"] = (agg.kind == sife::AggregationKind::EventStudy)
                       ? "event"
                       : (agg.kind == sife::AggregationKind::Group ? "group" : "overall");
      ja["index"] = agg.index;
      ja["estimate"] = agg.estimate;
      const double se = se_of_agg(agg);
      ja["se"] = se;
      ja["se_source"] = se_source;
      ja["ci_low"] = agg.estimate - sife::kZ975 * se;
      ja["ci_high"] = agg.estimate + sife::kZ975 * se;
      json w = json::array();
      for (const auto& [cell, weight] : agg.weights)
        w.push_back({{"g", cell.g}, {"t", cell.t}, {"weight", weight}});
      ja["weights"] = w;
      json ex = json::array();
      for (const auto& cell : agg.excluded) ex.push_back({{"g", cell.g}, {"t", cell.t}});
      ja["excluded"] = ex;
      if (have_band) {
        ja["sup_t_critical_value"] = band.critical_value;
        ja["sup_t_half_width"] = band.half_width(static_cast<Eigen::Index>(fitted.size() + a));
      }
      if (options.omega == sife::OmegaKind::PrincipalComponents)
        ja["se_note"] = "pca omega: no correction for Omega estimation";
      agg_list.push_back(ja);
    }
    j["aggregates"] = agg_list;
    sife::write_text_file((fs::path(args.out_dir) / "cells.json").string(), j.dump(2) + "\n");
  }
  // aggregates.csv
  if (!aggregates.empty()) {
    std::ostringstream csv;
    csv << comment_line(manifest.run_id);
    csv << "kind,index,estimate,se,ci_low,ci_high\n";
    for (const auto& agg : aggregates) {
      const double se = se_of_agg(agg);
      csv << agg.label() << ',' << agg.index << ',' << sife::format_double(agg.estimate) << ','
          << sife::format_double(se) << ',' << sife::format_double(agg.estimate - sife::kZ975 * se)
          << ',' << sife::format_double(agg.estimate + sife::kZ975 * se) << '\n';
    }
    sife::write_text_file((fs::path(args.out_dir) / "aggregates.csv").string(), csv.str());
  }
  sife::write_text_file((fs::path(args.out_dir) / "manifest.json").string(),
                        sife::manifest_to_json(manifest).dump(2) + "\n");

  // Console summary (4 decimals).
  std::cout << "cells (" << se_source << " se):\n";
  std::cout << "   g   t        att         se          z          p\n";
  std::size_t fit_idx = 0;
  int failures = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      const auto& est = fitted[fit_idx++];
      const double se = se_of_cell(est);
      const double z = se > 0 ? est.att / se : std::numeric_limits<double>::quiet_NaN();
      std::cout << "  " << o.cell.g << "   " << o.cell.t << "  " << std::setw(9)
                << sife::format_fixed(est.att, 4) << "  " << std::setw(9)
                << sife::format_fixed(se, 4) << "  " << std::setw(9) << sife::format_fixed(z, 4)
                << "  " << std::setw(9) << sife::format_fixed(se > 0 ? p_value(z) : NAN, 4) << "\n";
    } else {
      ++failures;
      std::cout << "  " << o.cell.g << "   " << o.cell.t << "  failed: "
                << sife::error_code_name(o.code) << "\n";
    }
  }
  for (const auto& agg : aggregates) {
    const double se = se_of_agg(agg);
    std::cout << agg.label() << ": " << sife::format_fixed(agg.estimate, 4) << " (se "
              << sife::format_fixed(se, 4) << ")\n";
  }
  std::cout << "outputs written to " << args.out_dir << " (run " << manifest.run_id << ")\n";
  return failures > 0 ? 3 : 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset;
  std::string config_path;
  int reps = 0;
  int n = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
  std::string out_dir = ".";
};

int run_simulate(const SimulateArgs& args) {
  if (args.preset.empty() == args.config_path.empty())
    sife::fail(sife::ErrorCode::BadArgument, "pass exactly one of --preset or --config");

  std::vector<sife::PresetRun> runs;
  std::string digest;
  if (!args.preset.empty()) {
    const int n = args.n > 0 ? args.n : 1000;
    const int reps = args.reps > 0 ? args.reps : 1000;
    const std::uint64_t seed = args.seed_set ? args.seed : 1;
    if (args.preset == "table1")
      runs = sife::preset_table1(n, reps, seed);
    else if (args.preset == "table2")
      runs = sife::preset_table2(n, reps, seed);
    else
      sife::fail(sife::ErrorCode::BadArgument, "--preset must be table1 or table2");
  } else {
    std::ifstream in(args.config_path);
    if (!in) sife::fail(sife::ErrorCode::MalformedInput, "cannot open " + args.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    sife::SimConfig config = sife::sim_config_from_json_text(ss.str());
    if (args.reps > 0) config.reps = args.reps;
    if (args.n > 0) config.n = args.n;
    if (args.seed_set) config.seed = args.seed;
    digest = sife::file_digest_hex(args.config_path);
    runs.push_back({"config", config});
  }
  for (auto& run : runs)
    if (args.threads >= 0) run.config.threads = args.threads;

  json options;
  options["preset"] = args.preset;
  options["config"] = args.config_path;
  options["reps"] = runs.front().config.reps;
  options["n"] = runs.front().config.n;
  options["seed"] = runs.front().config.seed;
  const sife::RunManifest manifest =
      sife::make_manifest("simulate", options, digest, runs.front().config.seed);

  std::vector<sife::McSummary> summaries;
  summaries.reserve(runs.size());
  for (const auto& run : runs) {
    std::cout << "running " << run.truth_label << " (" << run.config.reps << " reps, n="
              << run.config.n << ")...\n";
    summaries.push_back(sife::run_monte_carlo(run.config));
  }

  fs::create_directories(args.out_dir);
  // Wide table: rows estimator x parameter, stat columns per run label.
  const auto& rows0 = summaries.front().rows;
  {
    std::ostringstream csv;
    csv << comment_line(manifest.run_id);
    csv << "estimator,parameter";
    for (const auto& run : runs)
      csv << ',' << run.truth_label << "_bias," << run.truth_label << "_rmse,"
          << run.truth_label << "_mad," << run.truth_label << "_rej";
    csv << '\n';
    for (std::size_t r = 0; r < rows0.size(); ++r) {
      csv << rows0[r].estimator << ',' << rows0[r].parameter;
      for (const auto& summary : summaries) {
        const auto& row = summary.rows[r];
        csv << ',' << sife::format_double(row.bias) << ',' << sife::format_double(row.rmse) << ','
            << sife::format_double(row.mad) << ',' << sife::format_double(row.rej);
      }
      csv << '\n';
    }
    sife::write_text_file((fs::path(args.out_dir) / "table.csv").string(), csv.str());
  }
  // Tidy details.
  {
    std::ostringstream csv;
    csv << comment_line(manifest.run_id);
    csv << "run,estimator,parameter,bias,rmse,mad,rej,reps_used,failures\n";
    for (std::size_t s = 0; s < summaries.size(); ++s)
      for (const auto& row : summaries[s].rows)
        csv << runs[s].truth_label << ',' << row.estimator << ',' << row.parameter << ','
            << sife::format_double(row.bias) << ',' << sife::format_double(row.rmse) << ','
            << sife::format_double(row.mad) << ',' << sife::format_double(row.rej) << ','
            << row.reps_used << ',' << row.failures << '\n';
    sife::write_text_file((fs::path(args.out_dir) / "details.csv").string(), csv.str());
  }
  // Per-rep archive.
  {
    json j;
    j["run_id"] = manifest.run_id;
    json jruns = json::array();
    for (std::size_t s = 0; s < summaries.size(); ++s) {
      json jr;
      jr["label"] = runs[s].truth_label;
      jr["config"] = json::parse(sife::sim_config_to_json_text(summaries[s].config));
      json jrows = json::array();
      for (const auto& row : summaries[s].rows) {
        json jrow;
        jrow["estimator"] = row.estimator;
        jrow["parameter"] = row.parameter;
        json est = json::array(), se = json::array(), ok = json::array();
        for (const auto& d : row.draws) {
          est.push_back(d.est);
          se.push_back(d.se);
          ok.push_back(d.ok);
        }
        jrow["est"] = est;
        jrow["se"] = se;
        jrow["ok"] = ok;
        jrows.push_back(jrow);
      }
      jr["rows"] = jrows;
      jruns.push_back(jr);
    }
    j["runs"] = jruns;
    sife::write_text_file((fs::path(args.out_dir) / "per_rep.json").string(), j.dump() + "\n");
  }
  sife::write_text_file((fs::path(args.out_dir) / "manifest.json").string(),
                        sife::manifest_to_json(manifest).dump(2) + "\n");

  // Console: one block per run.
  for (std::size_t s = 0; s < summaries.size(); ++s) {
    std::cout << "\n== " << runs[s].truth_label << " ==\n";
    std::cout << "estimator        parameter      bias      rmse       mad       rej\n";
    for (const auto& row : summaries[s].rows) {
      std::cout << row.estimator << std::string(17 - std::min<std::size_t>(16, row.estimator.size()), ' ')
                << row.parameter << std::string(11 - std::min<std::size_t>(10, row.parameter.size()), ' ');
      std::cout << std::setw(9) << sife::format_fixed(row.bias, 4) << ' ' << std::setw(9)
                << sife::format_fixed(row.rmse, 4) << ' ' << std::setw(9)
                << sife::format_fixed(row.mad, 4) << ' ' << std::setw(9)
                << sife::format_fixed(row.rej, 4);
      if (row.failures > 0) std::cout << "   (" << row.failures << " failed reps)";
      std::cout << '\n';
    }
  }
  std::cout << "\noutputs written to " << args.out_dir << " (run " << manifest.run_id << ")\n";
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string data_path;
  int factors = 0;
  std::string omega = "last-block";
  std::vector<int> omega_periods;
  std::string out_dir = ".";
  bool drop_g1 = false;
};

int run_diagnose(const DiagnoseArgs& args) {
  sife::LoadOptions load;
  load.drop_first_period_treated = args.drop_g1;
  const sife::PanelDataset data = sife::PanelDataset::load_csv_file(args.data_path, load);
  const auto cells = sife::feasible_cells(data, args.factors);
  const sife::DiffPanel diffs = sife::first_differences(data);

  json options;
  options["data"] = args.data_path;
  options["factors"] = args.factors;
  options["omega"] = args.omega;
  options["omega_periods"] = args.omega_periods;
  const sife::RunManifest manifest = sife::make_manifest(
      "diagnose", options, sife::file_digest_hex(args.data_path), 0);

  json j;
  j["run_id"] = manifest.run_id;
  j["manifest"] = sife::manifest_to_json(manifest);
  json rank_list = json::array();
  int rank_failures = 0;
  for (const auto& cell : cells) {
    json jr;
    jr["g"] = cell.g;
    jr["t"] = cell.t;
    try {
      sife::OmegaSpec spec;
      spec.kind = (args.omega == "pca") ? sife::OmegaKind::PrincipalComponents
                                        : sife::OmegaKind::LastBlock;
      spec.r = args.factors;
      spec.periods = args.omega_periods;
      const auto omega = sife::build_omega(spec, cell, data);
      const auto gamma = sife::gamma_hat(cell, omega, data, diffs);
      const auto rep = sife::rank_diagnostic(gamma);
      jr["rank_ok"] = rep.rank_ok;
      jr["singular_values"] =
          std::vector<double>(rep.sigma.data(), rep.sigma.data() + rep.sigma.size());
      jr["condition"] = rep.condition;
      jr["sigma_ratio"] = rep.sigma_ratio;
      if (!rep.rank_ok) ++rank_failures;
      std::cout << "cell " << sife::cell_label(cell) << ": rank "
                << (rep.rank_ok ? "ok" : "DEFICIENT") << " (sigma ratio "
                << sife::format_double(rep.sigma_ratio) << ")\n";
    } catch (const sife::Error& e) {
      jr["rank_ok"] = false;
      jr["error"] = sife::error_code_name(e.code());
      ++rank_failures;
      std::cout << "cell " << sife::cell_label(cell) << ": " << e.what() << "\n";
    }
    rank_list.push_back(jr);
  }
  j["rank"] = rank_list;

  json gap_list = json::array();
  for (const auto& cell : cells) {
    try {
      const auto rep = sife::factor_count_diagnostic(data, cell.g, cell.t);
      json jg;
      jg["g"] = cell.g;
      jg["t"] = cell.t;
      jg["suggests_more_factors"] = rep.suggests_more_factors;
      json gaps = json::array();
      for (const auto& gap : rep.gaps)
        gaps.push_back({{"g1", group_label(gap.g1)},
                        {"g2", group_label(gap.g2)},
                        {"s", gap.s},
                        {"gap", gap.gap},
                        {"se", gap.se},
                        {"z", gap.z}});
      jg["gaps"] = gaps;
      gap_list.push_back(jg);
      if (rep.suggests_more_factors)
        std::cout << "cell " << sife::cell_label(cell)
                  << ": pre-period gaps are flat but the period gap is large; "
                     "consider more factors\n";
    } catch (const sife::Error&) {
      // fewer than 2 comparison groups: nothing to tabulate
    }
  }
  j["trend_gaps"] = gap_list;

  fs::create_directories(args.out_dir);
  sife::write_text_file((fs::path(args.out_dir) / "diagnostics.json").string(), j.dump(2) + "\n");
  sife::write_text_file((fs::path(args.out_dir) / "manifest.json").string(),
                        sife::manifest_to_json(manifest).dump(2) + "\n");
  std::cout << (rank_failures == 0 ? "all cells pass the rank check"
                                   : std::to_string(rank_failures) + " cell(s) fail the rank check")
            << "; report written to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(sife::kToolName) +
               ": group-time treatment effects under interactive fixed effects"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_est = app.add_subcommand("estimate", "estimate group-time effects from a panel CSV");
  cmd_est->add_option("--data", est.data_path, "input panel CSV")->required();
  cmd_est->add_option("--factors", est.factors, "number of factors to remove")->required();
  cmd_est->add_option("--omega", est.omega, "pre-period rotation: last-block or pca")
      ->check(CLI::IsMember({"last-block", "pca"}));
  cmd_est->add_option("--omega-periods", est.omega_periods,
                      "expert: pre-periods whose changes form the rotation rows");
  cmd_est->add_option("--weight", est.weight, "moment weighting: identity or two-step")
      ->check(CLI::IsMember({"identity", "two-step"}));
  cmd_est->add_option("--cells", est.cells, "all, or g,t pairs joined by ';'");
  cmd_est->add_option("--aggregate", est.aggregate, "none, event, group or overall")
      ->check(CLI::IsMember({"none", "event", "group", "overall"}));
  cmd_est->add_option("--bootstrap", est.bootstrap, "multiplier bootstrap draws (0 = analytic se)");
  cmd_est->add_option("--seed", est.seed, "bootstrap seed")->each([&](const std::string&) {
    est.seed_set = true;
  });
  cmd_est->add_option("--mult", est.mult, "multiplier law: rademacher or normal")
      ->check(CLI::IsMember({"rademacher", "normal"}));
  cmd_est->add_option("--threads", est.threads, "worker threads (0 = hardware)")
      ->envname("STAGGERED_IFE_THREADS");
  cmd_est->add_option("--out", est.out_dir, "output directory");
  cmd_est->add_flag("--keep-going", est.keep_going, "continue past failing cells");
  cmd_est->add_flag("--drop-g1", est.drop_g1, "drop units treated from the first period");

  SimulateArgs sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "run the benchmark Monte Carlo designs");
  cmd_sim->add_option("--preset", sim.preset, "table1 or table2");
  cmd_sim->add_option("--config", sim.config_path, "simulation config JSON");
  cmd_sim->add_option("--reps", sim.reps, "override replication count");
  cmd_sim->add_option("--n", sim.n, "override panel size");
  cmd_sim->add_option("--seed", sim.seed, "simulation seed")->each([&](const std::string&) {
    sim.seed_set = true;
  });
  cmd_sim->add_option("--threads", sim.threads, "worker threads (0 = hardware)")
      ->envname("STAGGERED_IFE_THREADS");
  cmd_sim->add_option("--out", sim.out_dir, "output directory");

  DiagnoseArgs diag;
  CLI::App* cmd_diag = app.add_subcommand("diagnose", "rank and trend-gap diagnostics");
  cmd_diag->add_option("--data", diag.data_path, "input panel CSV")->required();
  cmd_diag->add_option("--factors", diag.factors, "number of factors to check")->required();
  cmd_diag->add_option("--omega", diag.omega, "pre-period rotation: last-block or pca")
      ->check(CLI::IsMember({"last-block", "pca"}));
  cmd_diag->add_option("--omega-periods", diag.omega_periods,
                       "expert: pre-periods whose changes form the rotation rows");
  cmd_diag->add_option("--out", diag.out_dir, "output directory");
  cmd_diag->add_flag("--drop-g1", diag.drop_g1, "drop units treated from the first period");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_diag->parsed()) return run_diagnose(diag);
  } catch (const sife::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
