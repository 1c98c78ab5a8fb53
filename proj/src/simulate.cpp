#include "staggered_ife/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <thread>

#include "json.hpp"
#include "staggered_ife/errors.hpp"
#include "staggered_ife/format.hpp"
#include "staggered_ife/linalg.hpp"
#include "staggered_ife/rng.hpp"

namespace sife {

namespace {

using nlohmann::json;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::min(resolve_threads(threads), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    const int lo = count * w / threads;
    const int hi = count * (w + 1) / threads;
    pool.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void validate_config(const SimConfig& c) {
  if (c.n < 1) fail(ErrorCode::BadArgument, "sim: n must be >= 1");
  if (c.periods < 2) fail(ErrorCode::BadArgument, "sim: periods must be >= 2");
  if (c.reps < 1) fail(ErrorCode::BadArgument, "sim: reps must be >= 1");
  if (c.truth_ife < -1 || c.truth_ife > 3)
    fail(ErrorCode::BadArgument, "sim: truth_ife must be in -1..3");
  if (c.treated_groups.empty()) fail(ErrorCode::BadArgument, "sim: no treated groups");
  std::set<int> seen;
  for (int g : c.treated_groups) {
    if (g < 2 || g > c.periods)
      fail(ErrorCode::BadArgument, "sim: treated group " + std::to_string(g) + " outside 2..T");
    if (!seen.insert(g).second) fail(ErrorCode::BadArgument, "sim: duplicate treated group");
  }
  if (!c.theta.empty() && static_cast<int>(c.theta.size()) != c.periods)
    fail(ErrorCode::BadArgument, "sim: theta must have one entry per period");
  if (c.factor_override &&
      (c.factor_override->rows() != c.periods || c.factor_override->cols() != 3))
    fail(ErrorCode::BadArgument, "sim: factor override must be periods x 3");
  if (c.estimators.empty()) fail(ErrorCode::BadArgument, "sim: no estimators requested");
  if (c.parameters.empty()) fail(ErrorCode::BadArgument, "sim: no parameters requested");
}

Eigen::MatrixXd benchmark_factors(int t_count) {
  Eigen::MatrixXd f(t_count, 3);
  for (int t = 1; t <= t_count; ++t) {
    const double sign_t = (t % 2 == 0) ? 1.0 : -1.0;
    f(t - 1, 0) = static_cast<double>(t);
    f(t - 1, 1) = sign_t * t * std::log(static_cast<double>(t));
    const double hump = 5.0 - std::fabs(5.0 - t);
    f(t - 1, 2) = (t > 5 ? -1.0 : 1.0) * hump * hump;
  }
  return f;
}

}  // namespace

std::string EstimatorSpec::label() const {
  switch (kind) {
    case Kind::Staggered: return "ife" + std::to_string(r);
    case Kind::Levels: return "levels";
    case Kind::Did: return "did";
    case Kind::LinearTrends: return "linear-trends";
  }
  return "?";
}

EstimatorSpec estimator_spec_from_string(const std::string& s) {
  EstimatorSpec spec;
  if (s == "levels") {
    spec.kind = EstimatorSpec::Kind::Levels;
    return spec;
  }
  if (s == "did") {
    spec.kind = EstimatorSpec::Kind::Did;
    return spec;
  }
  if (s == "linear-trends" || s == "trends") {
    spec.kind = EstimatorSpec::Kind::LinearTrends;
    return spec;
  }
  if (s.rfind("ife", 0) == 0) {
    spec.kind = EstimatorSpec::Kind::Staggered;
    try {
      spec.r = std::stoi(s.substr(3));
    } catch (...) {
      fail(ErrorCode::BadArgument, "bad estimator spec: " + s);
    }
    if (spec.r < 0) fail(ErrorCode::BadArgument, "bad estimator spec: " + s);
    return spec;
  }
  fail(ErrorCode::BadArgument,
       "unknown estimator '" + s + "' (want ifeR, levels, did, linear-trends)");
}

std::string ParamSpec::label() const {
  if (kind == Kind::Overall) return "overall";
  return "es" + std::to_string(e);
}

ParamSpec param_spec_from_string(const std::string& s) {
  ParamSpec p;
  if (s == "overall") return p;
  if (s.rfind("es", 0) == 0) {
    p.kind = ParamSpec::Kind::EventStudy;
    try {
      p.e = std::stoi(s.substr(2));
    } catch (...) {
      fail(ErrorCode::BadArgument, "bad parameter spec: " + s);
    }
    if (p.e < 0) fail(ErrorCode::BadArgument, "bad parameter spec: " + s);
    return p;
  }
  fail(ErrorCode::BadArgument, "unknown parameter '" + s + "' (want overall or esE)");
}

SimConfig sim_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::MalformedInput, std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::MalformedInput, "config: expected a JSON object");

  static const std::set<std::string> known = {
      "n", "periods", "treated_groups", "include_never", "truth_ife", "rho",
      "lambda1_slope", "l", "sd_eta", "sd_lambda", "sd_e", "e_law", "never_code",
      "het_slope", "theta", "tau", "exact_group_means", "factors", "loading_means",
      "reps", "seed", "threads", "estimators", "parameters", "omega", "weight"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(ErrorCode::BadArgument, "config: unknown key '" + key + "'");

  SimConfig c;
  try {
    if (j.contains("n")) c.n = j["n"].get<int>();
    if (j.contains("periods")) c.periods = j["periods"].get<int>();
    if (j.contains("treated_groups")) c.treated_groups = j["treated_groups"].get<std::vector<int>>();
    if (j.contains("include_never")) c.include_never = j["include_never"].get<bool>();
    if (j.contains("truth_ife")) c.truth_ife = j["truth_ife"].get<int>();
    if (j.contains("rho")) c.rho = j["rho"].get<double>();
    if (j.contains("lambda1_slope")) c.lambda1_slope = j["lambda1_slope"].get<double>();
    if (j.contains("l")) c.lambda1_slope = j["l"].get<double>();
    if (j.contains("sd_eta")) c.sd_eta = j["sd_eta"].get<double>();
    if (j.contains("sd_lambda")) c.sd_lambda = j["sd_lambda"].get<double>();
    if (j.contains("sd_e")) c.sd_e = j["sd_e"].get<double>();
    if (j.contains("e_law")) {
      const std::string law = j["e_law"].get<std::string>();
      if (law == "normal") c.e_law = NoiseLaw::Normal;
      else if (law == "uniform") c.e_law = NoiseLaw::Uniform;
      else fail(ErrorCode::BadArgument, "config: e_law must be normal or uniform");
    }
    if (j.contains("never_code")) c.never_code = j["never_code"].get<double>();
    if (j.contains("het_slope")) c.het_slope = j["het_slope"].get<double>();
    if (j.contains("theta")) c.theta = j["theta"].get<std::vector<double>>();
    if (j.contains("tau")) c.tau = j["tau"].get<double>();
    if (j.contains("exact_group_means")) c.exact_group_means = j["exact_group_means"].get<bool>();
    if (j.contains("factors")) {
      const auto rows = j["factors"].get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd f(static_cast<Eigen::Index>(rows.size()), 3);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != 3) fail(ErrorCode::BadArgument, "config: factors rows must have 3 entries");
        for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(t), k) = rows[t][static_cast<std::size_t>(k)];
      }
      c.factor_override = f;
    }
    if (j.contains("loading_means")) {
      for (const auto& [key, value] : j["loading_means"].items()) {
        const int g = (key == "inf") ? kNever : std::stoi(key);
        const auto v = value.get<std::vector<double>>();
        if (v.size() != 3) fail(ErrorCode::BadArgument, "config: loading_means entries need 3 values");
        c.loading_mean_override[g] = Eigen::Vector3d(v[0], v[1], v[2]);
      }
    }
    if (j.contains("reps")) c.reps = j["reps"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& e : j["estimators"]) c.estimators.push_back(estimator_spec_from_string(e.get<std::string>()));
    }
    if (j.contains("parameters")) {
      c.parameters.clear();
      for (const auto& p : j["parameters"]) c.parameters.push_back(param_spec_from_string(p.get<std::string>()));
    }
    if (j.contains("omega")) {
      const std::string o = j["omega"].get<std::string>();
      if (o == "last-block") c.omega = OmegaKind::LastBlock;
      else if (o == "pca") c.omega = OmegaKind::PrincipalComponents;
      else fail(ErrorCode::BadArgument, "config: omega must be last-block or pca");
    }
    if (j.contains("weight")) {
      const std::string w = j["weight"].get<std::string>();
      if (w == "identity") c.weight = WeightMode::Identity;
      else if (w == "two-step") c.weight = WeightMode::TwoStep;
      else fail(ErrorCode::BadArgument, "config: weight must be identity or two-step");
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::BadArgument, std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

std::string sim_config_to_json_text(const SimConfig& c) {
  json j;
  j["n"] = c.n;
  j["periods"] = c.periods;
  j["treated_groups"] = c.treated_groups;
  j["include_never"] = c.include_never;
  j["truth_ife"] = c.truth_ife;
  j["rho"] = c.rho;
  if (c.lambda1_slope) j["lambda1_slope"] = *c.lambda1_slope;
  j["sd_eta"] = c.sd_eta;
  j["sd_lambda"] = c.sd_lambda;
  j["sd_e"] = c.sd_e;
  j["e_law"] = (c.e_law == NoiseLaw::Normal) ? "normal" : "uniform";
  j["never_code"] = c.never_code;
  if (c.het_slope) j["het_slope"] = *c.het_slope;
  if (!c.theta.empty()) j["theta"] = c.theta;
  j["tau"] = c.tau;
  j["exact_group_means"] = c.exact_group_means;
  if (c.factor_override) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index t = 0; t < c.factor_override->rows(); ++t)
      rows.push_back({(*c.factor_override)(t, 0), (*c.factor_override)(t, 1),
                      (*c.factor_override)(t, 2)});
    j["factors"] = rows;
  }
  if (!c.loading_mean_override.empty()) {
    json lm = json::object();
    for (const auto& [g, v] : c.loading_mean_override)
      lm[is_never(g) ? "inf" : std::to_string(g)] = std::vector<double>{v(0), v(1), v(2)};
    j["loading_means"] = lm;
  }
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  std::vector<std::string> est;
  for (const auto& e : c.estimators) est.push_back(e.label());
  j["estimators"] = est;
  std::vector<std::string> par;
  for (const auto& p : c.parameters) par.push_back(p.label());
  j["parameters"] = par;
  j["omega"] = (c.omega == OmegaKind::LastBlock) ? "last-block" : "pca";
  j["weight"] = (c.weight == WeightMode::Identity) ? "identity" : "two-step";
  return j.dump(2);
}

PanelDataset generate_panel(const SimConfig& config, std::uint64_t rep, LatentRecord* latents) {
  validate_config(config);
  const int n = config.n;
  const int t_count = config.periods;
  const int active = config.truth_ife <= 0 ? 0 : std::min(config.truth_ife, 3);
  const double h = config.het_slope.value_or(config.truth_ife < 0 ? 0.0 : 1.0);
  const double slope1 = config.lambda1_slope.value_or(2.0);

  Eigen::MatrixXd f_eff = config.factor_override.value_or(benchmark_factors(t_count));
  for (int k = active; k < 3; ++k) f_eff.col(k).setZero();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(t_count);
  for (std::size_t t = 0; t < config.theta.size(); ++t) theta(static_cast<Eigen::Index>(t)) = config.theta[t];

  std::vector<int> options = config.treated_groups;
  std::sort(options.begin(), options.end());
  if (config.include_never) options.push_back(kNever);

  auto loading_means = [&](int g) -> Eigen::Vector3d {
    const auto it = config.loading_mean_override.find(g);
    if (it != config.loading_mean_override.end()) return it->second;
    const double code = is_never(g) ? config.never_code : static_cast<double>(g);
    return {1.0 + slope1 * code, 1.0 - 5.0 * code, 5.0 - 10.0 * code};
  };

  // Draw order is part of the reproducibility contract: group codes first,
  // then 7 normals per unit (Z1..Z3, lambda noise x3, eta noise), then the
  // idiosyncratic shocks unit-major (skipped entirely when sd_e == 0).
  RngStream stream(config.seed, rng_tag::kPanel, rep);
  std::vector<int> groups(n);
  for (int i = 0; i < n; ++i)
    groups[i] = options[stream.next_below(static_cast<std::uint32_t>(options.size()))];

  Eigen::MatrixXd lambda(n, 3);
  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d z{stream.next_normal(), stream.next_normal(), stream.next_normal()};
    const Eigen::Vector3d eps{stream.next_normal(), stream.next_normal(), stream.next_normal()};
    const double eps_eta = stream.next_normal();
    const double code = is_never(groups[i]) ? config.never_code : static_cast<double>(groups[i]);
    lambda.row(i) = (loading_means(groups[i]) + config.rho * z + config.sd_lambda * eps).transpose();
    eta(i) = h * code + config.sd_eta * eps_eta;
  }

  if (config.exact_group_means) {
    // Recentre latents so every group mean sits exactly on its target; with
    // sd_e = 0 this makes the moment design exact, which the noiseless
    // recovery and degeneracy tests rely on.
    std::map<int, std::vector<int>> members;
    for (int i = 0; i < n; ++i) members[groups[i]].push_back(i);
    for (const auto& [g, idx] : members) {
      Eigen::Vector3d mean_l = Eigen::Vector3d::Zero();
      double mean_e = 0.0;
      for (int i : idx) {
        mean_l += lambda.row(i).transpose();
        mean_e += eta(i);
      }
      mean_l /= static_cast<double>(idx.size());
      mean_e /= static_cast<double>(idx.size());
      const double code = is_never(g) ? config.never_code : static_cast<double>(g);
      const Eigen::Vector3d shift = loading_means(g) - mean_l;
      const double shift_e = h * code - mean_e;
      for (int i : idx) {
        lambda.row(i) += shift.transpose();
        eta(i) += shift_e;
      }
    }
  }

  Eigen::MatrixXd y(n, t_count);
  for (int i = 0; i < n; ++i) {
    for (int t = 1; t <= t_count; ++t) {
      double v = theta(t - 1) + eta(i) + lambda.row(i).dot(f_eff.row(t - 1));
      if (config.sd_e > 0.0) {
        const double shock = (config.e_law == NoiseLaw::Normal)
                                 ? stream.next_normal()
                                 : (stream.next_uniform() - 0.5) * std::sqrt(12.0);
        v += config.sd_e * shock;
      }
      if (!is_never(groups[i]) && t >= groups[i]) v += config.tau;
      y(i, t - 1) = v;
    }
  }

  if (latents) {
    latents->theta = theta;
    latents->factors = f_eff;
    latents->lambda = lambda;
    latents->eta = eta;
    latents->het_slope = h;
    latents->group_loading_means.clear();
    for (int g : options) latents->group_loading_means[g] = loading_means(g);
  }
  return PanelDataset(std::move(y), std::move(groups));
}

std::vector<AttEstimate> estimator_levels(const PanelDataset& data,
                                          const std::vector<CellIndex>& cells) {
  const int n = data.n_units();
  const GroupShares shares = group_shares(data);
  std::vector<AttEstimate> out;
  out.reserve(cells.size());
  for (const CellIndex& cell : cells) {
    const auto comp = comparison_set(cell.g, cell.t, data.groups_present());
    if (comp.empty())
      fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": no comparison group");
    if (data.group_count(cell.g) == 0)
      fail(ErrorCode::EmptyTreatedGroup, "cell " + cell_label(cell) + ": no treated units");
    const Eigen::VectorXd col = data.outcomes().col(cell.t - 1);

    auto group_mean = [&](int g) {
      const auto& units = data.units_in_group(g);
      double m = 0.0;
      for (int i : units) m += col(i);
      return m / static_cast<double>(units.size());
    };

    const double mu_g = group_mean(cell.g);
    std::vector<double> mu_c(comp.size());
    double comp_mean = 0.0;
    for (std::size_t j = 0; j < comp.size(); ++j) {
      mu_c[j] = group_mean(comp[j]);
      comp_mean += mu_c[j];
    }
    comp_mean /= static_cast<double>(comp.size());

    AttEstimate est;
    est.cell = cell;
    est.fit.cell = cell;
    est.att = mu_g - comp_mean;
    est.influence = Eigen::VectorXd::Zero(n);
    const double p_g = shares.at(cell.g);
    const double inv_c = 1.0 / static_cast<double>(comp.size());
    for (int i = 0; i < n; ++i) {
      if (data.group(i) == cell.g) est.influence(i) = (col(i) - mu_g) / p_g;
    }
    for (std::size_t j = 0; j < comp.size(); ++j) {
      const double p_j = shares.at(comp[j]);
      for (int i : data.units_in_group(comp[j]))
        est.influence(i) -= inv_c * (col(i) - mu_c[j]) / p_j;
    }
    est.se = std::sqrt(est.influence.squaredNorm() / n / n);
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<AttEstimate> estimator_did(const PanelDataset& data,
                                       const std::vector<CellIndex>& cells) {
  // Classic two-group construction: long difference of the treated group
  // against the pooled not-yet-treated units. Differs from the r = 0 moment
  // fit only in how comparison groups are weighted (by their sizes here,
  // equally there).
  const int n = data.n_units();
  const Eigen::MatrixXd& y = data.outcomes();
  std::vector<AttEstimate> out;
  out.reserve(cells.size());
  for (const CellIndex& cell : cells) {
    if (cell.g < 2 || cell.g > data.n_periods() || cell.t < cell.g ||
        cell.t > data.n_periods())
      fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": outside the panel");
    const auto& treated = data.units_in_group(cell.g);
    if (treated.empty())
      fail(ErrorCode::EmptyTreatedGroup, "cell " + cell_label(cell) + ": no treated units");
    double mu_g = 0.0, mu_c = 0.0;
    int n_c = 0;
    auto longdiff = [&](int i) { return y(i, cell.t - 1) - y(i, cell.g - 2); };
    for (int i : treated) mu_g += longdiff(i);
    mu_g /= static_cast<double>(treated.size());
    for (int i = 0; i < n; ++i)
      if (data.group(i) > cell.t) {
        mu_c += longdiff(i);
        ++n_c;
      }
    if (n_c == 0)
      fail(ErrorCode::EmptyComparisonGroup,
           "cell " + cell_label(cell) + ": nobody is still untreated at t");
    mu_c /= n_c;

    AttEstimate est;
    est.cell = cell;
    est.fit.cell = cell;
    est.att = mu_g - mu_c;
    const double p_g = static_cast<double>(treated.size()) / n;
    const double p_c = static_cast<double>(n_c) / n;
    est.influence = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (data.group(i) == cell.g)
        est.influence(i) = (longdiff(i) - mu_g) / p_g;
      else if (data.group(i) > cell.t)
        est.influence(i) = -(longdiff(i) - mu_c) / p_c;
    }
    est.se = std::sqrt(est.influence.squaredNorm() / n / n);
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<AttEstimate> estimator_linear_trends(const PanelDataset& data,
                                                 const std::vector<CellIndex>& cells) {
  const int n = data.n_units();
  const int t_count = data.n_periods();
  const Eigen::MatrixXd& y = data.outcomes();

  // Untreated window of unit i is always the prefix 1..m_i (m = G-1, or T for
  // never-treated). Everything unit-level only depends on m, so precompute
  // the within-unit trend projections per prefix length.
  std::vector<int> m_of(n);
  for (int i = 0; i < n; ++i) {
    const int g = data.group(i);
    const int m = is_never(g) ? t_count : g - 1;
    if (m < 2)
      fail(ErrorCode::InsufficientPrePeriods,
           "unit-trend fit needs >= 2 untreated periods; a unit has " + std::to_string(m));
    m_of[i] = m;
  }

  struct Prefix {
    Eigen::Matrix2d gram_inv;
    Eigen::MatrixXd hat;  // m x m: X (X'X)^-1 X'
  };
  std::vector<Prefix> prefix(t_count + 1);
  for (int m = 2; m <= t_count; ++m) {
    Eigen::MatrixXd x(m, 2);
    for (int s = 1; s <= m; ++s) {
      x(s - 1, 0) = 1.0;
      x(s - 1, 1) = static_cast<double>(s);
    }
    Eigen::Matrix2d gram = (x.transpose() * x);
    prefix[m].gram_inv = gram.inverse();
    prefix[m].hat = x * prefix[m].gram_inv * x.transpose();
  }

  // Concentrated normal equations for the period effects: A theta = b with
  // the per-unit (intercept, trend) profiled out. A is only T x T.
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(t_count, t_count);
  Eigen::VectorXd b_vec = Eigen::VectorXd::Zero(t_count);
  std::vector<int> m_count(t_count + 1, 0);
  for (int i = 0; i < n; ++i) ++m_count[m_of[i]];
  for (int m = 2; m <= t_count; ++m) {
    if (m_count[m] == 0) continue;
    a_mat.topLeftCorner(m, m) +=
        m_count[m] * (Eigen::MatrixXd::Identity(m, m) - prefix[m].hat);
  }
  for (int i = 0; i < n; ++i) {
    const int m = m_of[i];
    const Eigen::VectorXd ys = y.row(i).head(m).transpose();
    b_vec.head(m) += ys - prefix[m].hat * ys;
  }
  // Rank deficiency is structural (a common constant and a common linear
  // trend can move between theta and the unit fits without changing any
  // fitted or imputed value), so the pseudo-inverse picks one representative.
  const Eigen::MatrixXd a_pinv = pseudo_inverse(a_mat);
  const Eigen::VectorXd theta = a_pinv * b_vec;

  // Per-unit intercept/trend given theta, plus within-window residuals
  // (the unit's score contribution to the theta fit).
  Eigen::VectorXd eta_hat(n), slope_hat(n);
  Eigen::MatrixXd resid = Eigen::MatrixXd::Zero(n, t_count);
  for (int i = 0; i < n; ++i) {
    const int m = m_of[i];
    const Eigen::VectorXd centered = y.row(i).head(m).transpose() - theta.head(m);
    double c0 = 0.0, c1 = 0.0;
    for (int s = 1; s <= m; ++s) {
      c0 += centered(s - 1);
      c1 += s * centered(s - 1);
    }
    const Eigen::Vector2d ab = prefix[m].gram_inv * Eigen::Vector2d(c0, c1);
    eta_hat(i) = ab(0);
    slope_hat(i) = ab(1);
    for (int s = 1; s <= m; ++s) resid(i, s - 1) = centered(s - 1) - (ab(0) + ab(1) * s);
  }

  const GroupShares shares = group_shares(data);
  std::vector<AttEstimate> out;
  out.reserve(cells.size());
  for (const CellIndex& cell : cells) {
    if (cell.t < cell.g || cell.t > t_count)
      fail(ErrorCode::InfeasibleCell, "cell " + cell_label(cell) + ": period outside g..T");
    if (comparison_set(cell.g, cell.t, data.groups_present()).empty())
      fail(ErrorCode::InfeasibleCell,
           "cell " + cell_label(cell) + ": no untreated units pin down the period effect");
    const auto& treated = data.units_in_group(cell.g);
    if (treated.empty())
      fail(ErrorCode::EmptyTreatedGroup, "cell " + cell_label(cell) + ": no treated units");

    const double p_g = shares.at(cell.g);
    double att = 0.0;
    for (int i : treated)
      att += y(i, cell.t - 1) - theta(cell.t - 1) - eta_hat(i) - slope_hat(i) * cell.t;
    att /= static_cast<double>(treated.size());

    // Imputation coefficients on theta are shared by all treated units of the
    // group (same untreated window), which keeps the correction cheap.
    const int m = cell.g - 1;
    Eigen::VectorXd c_vec = Eigen::VectorXd::Zero(t_count);
    c_vec(cell.t - 1) = 1.0;
    const Eigen::Vector2d xt(1.0, static_cast<double>(cell.t));
    for (int s = 1; s <= m; ++s) {
      const Eigen::Vector2d xs(1.0, static_cast<double>(s));
      c_vec(s - 1) = -xt.dot(prefix[m].gram_inv * xs);
    }
    const Eigen::VectorXd d_vec = a_pinv * c_vec;

    AttEstimate est;
    est.cell = cell;
    est.fit.cell = cell;
    est.att = att;
    est.influence = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      // theta channel: d theta = A^+ * resid_i per unit, and A^+ is O(1/n),
      // so the per-unit influence needs the factor n to be O(1).
      double value = -n * resid.row(i).dot(d_vec);
      if (data.group(i) == cell.g) {
        const double q = y(i, cell.t - 1) - theta(cell.t - 1) - eta_hat(i) - slope_hat(i) * cell.t;
        value += (q - att) / p_g;
      }
      est.influence(i) = value;
    }
    est.se = std::sqrt(est.influence.squaredNorm() / n / n);
    out.push_back(std::move(est));
  }
  return out;
}

McSummary run_monte_carlo(const SimConfig& config) {
  validate_config(config);
  McSummary summary;
  summary.config = config;
  const int n_rows = static_cast<int>(config.estimators.size() * config.parameters.size());
  summary.rows.resize(n_rows);
  for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
    for (std::size_t pi = 0; pi < config.parameters.size(); ++pi) {
      McRow& row = summary.rows[ei * config.parameters.size() + pi];
      row.estimator = config.estimators[ei].label();
      row.parameter = config.parameters[pi].label();
      row.draws.assign(static_cast<std::size_t>(config.reps), McDraw{});
    }
  }

  parallel_for(config.reps, config.threads, [&](int rep) {
    const PanelDataset data = generate_panel(config, static_cast<std::uint64_t>(rep));
    for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
      const EstimatorSpec& spec = config.estimators[ei];
      std::vector<AttEstimate> ests;
      bool est_ok = true;
      try {
        switch (spec.kind) {
          case EstimatorSpec::Kind::Staggered: {
            CellOptions options;
            options.r = spec.r;
            options.omega = config.omega;
            options.weight = config.weight;
            ests = estimate_cells_strict(data, feasible_cells(data, spec.r), options);
            break;
          }
          case EstimatorSpec::Kind::Did:
            ests = estimator_did(data, feasible_cells(data, 0));
            break;
          case EstimatorSpec::Kind::Levels:
            ests = estimator_levels(data, feasible_cells(data, 0));
            break;
          case EstimatorSpec::Kind::LinearTrends:
            ests = estimator_linear_trends(data, feasible_cells(data, 0));
            break;
        }
      } catch (const Error&) {
        est_ok = false;
      }
      for (std::size_t pi = 0; pi < config.parameters.size(); ++pi) {
        McDraw& draw =
            summary.rows[ei * config.parameters.size() + pi].draws[static_cast<std::size_t>(rep)];
        if (!est_ok) continue;
        try {
          const ParamSpec& param = config.parameters[pi];
          const AggregationResult agg = (param.kind == ParamSpec::Kind::Overall)
                                            ? overall_average(ests, data)
                                            : event_study(ests, data, param.e);
          draw.est = agg.estimate;
          draw.se = agg.se;
          draw.ok = true;
        } catch (const Error&) {
          // parameter-level infeasibility (e.g. event time out of reach)
        }
      }
    }
  });

  const double truth = config.tau;
  for (McRow& row : summary.rows) {
    std::vector<double> errors;
    errors.reserve(row.draws.size());
    int rejections = 0;
    row.rej_reps = 0;
    for (const McDraw& d : row.draws) {
      if (!d.ok) continue;
      errors.push_back(d.est - truth);
      if (d.se > 0.0) {
        ++row.rej_reps;
        if (std::fabs(d.est / d.se) > kZ975) ++rejections;
      }
    }
    row.reps_used = static_cast<int>(errors.size());
    row.failures = config.reps - row.reps_used;
    if (errors.empty()) {
      row.bias = row.rmse = row.mad = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.bias = pairwise_sum(errors) / row.reps_used;
      std::vector<double> sq(errors.size());
      for (std::size_t k = 0; k < errors.size(); ++k) sq[k] = errors[k] * errors[k];
      row.rmse = std::sqrt(pairwise_sum(sq) / row.reps_used);
      row.mad = median_abs(errors);
    }
    row.rej = (row.rej_reps > 0) ? static_cast<double>(rejections) / row.rej_reps
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return summary;
}

std::vector<PresetRun> preset_table1(int n, int reps, std::uint64_t seed) {
  SimConfig base;
  base.n = n;
  base.reps = reps;
  base.seed = seed;
  base.estimators = {
      {EstimatorSpec::Kind::Levels, 0},    {EstimatorSpec::Kind::Staggered, 0},
      {EstimatorSpec::Kind::Staggered, 1}, {EstimatorSpec::Kind::Staggered, 2},
      {EstimatorSpec::Kind::Did, 0},       {EstimatorSpec::Kind::LinearTrends, 0},
  };
  base.parameters = {{ParamSpec::Kind::Overall, 0}};
  // The data-driven rotation keeps the moment design away from weak
  // denominators; it is the variant the benchmark numbers assume.
  base.omega = OmegaKind::PrincipalComponents;
  std::vector<PresetRun> runs;
  for (const auto& [label, truth] :
       std::vector<std::pair<std::string, int>>{{"none", -1}, {"0ife", 0}, {"1ife", 1}, {"2ife", 2}}) {
    SimConfig c = base;
    c.truth_ife = truth;
    runs.push_back({label, c});
  }
  return runs;
}

std::vector<PresetRun> preset_table2(int n, int reps, std::uint64_t seed) {
  SimConfig base;
  base.n = n;
  base.reps = reps;
  base.seed = seed;
  base.truth_ife = 1;
  base.omega = OmegaKind::PrincipalComponents;
  base.estimators = {
      {EstimatorSpec::Kind::Levels, 0},
      {EstimatorSpec::Kind::Staggered, 0},
      {EstimatorSpec::Kind::Staggered, 1},
      {EstimatorSpec::Kind::Staggered, 2},
  };
  base.parameters = {{ParamSpec::Kind::Overall, 0},
                     {ParamSpec::Kind::EventStudy, 0},
                     {ParamSpec::Kind::EventStudy, 1},
                     {ParamSpec::Kind::EventStudy, 2}};
  std::vector<PresetRun> runs;
  for (double l : {0.5, 0.1, 0.01, 0.001}) {
    SimConfig c = base;
    c.lambda1_slope = l;
    runs.push_back({"l" + format_double(l), c});
  }
  return runs;
}

SimConfig degenerate_factor_config(std::uint64_t seed) {
  SimConfig c;
  c.n = 300;
  c.truth_ife = 2;
  c.sd_e = 0.0;
  c.exact_group_means = true;
  c.reps = 1;
  c.seed = seed;
  c.estimators = {{EstimatorSpec::Kind::Staggered, 2}};
  RngStream s(seed, rng_tag::kGeneric, 101);
  // Second factor exactly collinear with the first: the pre-period factor
  // block has rank 1 < 2 for every cell.
  const double scale = (s.next_uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + 1.5 * s.next_uniform());
  Eigen::MatrixXd f = benchmark_factors(c.periods);
  f.col(1) = scale * f.col(0);
  f.col(2).setZero();
  c.factor_override = f;
  // Loading means deliberately in general position so the failure is
  // attributable to the factors, not the loadings.
  for (int g : {5, 6, 7, 8, kNever})
    c.loading_mean_override[g] =
        Eigen::Vector3d(3.0 * s.next_normal(), 3.0 * s.next_normal(), 0.0);
  return c;
}

SimConfig degenerate_loading_config(int r, std::uint64_t seed) {
  if (r < 1 || r > 2) fail(ErrorCode::BadArgument, "degenerate loading design supports r in {1,2}");
  SimConfig c;
  c.n = 300;
  c.truth_ife = r;
  c.sd_e = 0.0;
  c.exact_group_means = true;
  c.reps = 1;
  c.seed = seed;
  c.estimators = {{EstimatorSpec::Kind::Staggered, r}};
  RngStream s(seed, rng_tag::kGeneric, 202);
  // Put every group's loading means on an (r-1)-dimensional affine subspace:
  // the comparison design (1, mean loadings) then has rank r < r+1.
  const Eigen::Vector2d base(2.0 * s.next_normal(), 2.0 * s.next_normal());
  Eigen::Vector2d dir(0.0, 0.0);
  if (r == 2) {
    do {
      dir = Eigen::Vector2d(s.next_normal(), s.next_normal());
    } while (dir.norm() < 0.1);
  }
  double coord = 0.0;
  for (int g : {5, 6, 7, 8, kNever}) {
    coord += 0.5 + s.next_uniform();  // strictly increasing => distinct points
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    mean.head(2) = base + dir * (r == 2 ? coord : 0.0);
    c.loading_mean_override[g] = mean;
  }
  return c;
}

}  // namespace sife
