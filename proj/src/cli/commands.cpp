#include "hyperme/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common.hpp"
#include "hyperme/error.hpp"
#include "hyperme/fluctuations.hpp"

namespace hyperme::cli {
namespace {

using detail::PhaseTimer;
using detail::to_json;

Bundle start(const std::string& command, const ModelSpec& spec) {
  Bundle b;
  b.command = command;
  b.spec_name = spec.name;
  b.spec_hash = spec.hash;
  return b;
}

[[noreturn]] void missing_block(const ModelSpec& spec, const std::string& block, const std::string& command) {
  throw CliError(kExitSchema, spec.source + ": $." + block + ": required by '" + command + "'");
}

void append_warnings(Bundle& b, const std::vector<std::string>& w) { b.warnings.insert(b.warnings.end(), w.begin(), w.end()); }

Table profile_table(const FamilyTable& tab) {
  const ParameterGrid& grid = tab.profile.grid;
  const std::size_t d = grid.dim();
  Table t{"profile", {}, {}, {}};
  detail::add_coordinate_columns(t, grid);
  t.add_column("S", "nats");
  const bool with_lambda = !tab.profile.multipliers.empty();
  if (with_lambda) {
    for (Eigen::Index i = 0; i < tab.profile.multipliers.front().size(); ++i) {
      t.add_column("lambda_" + std::to_string(i), "1/observable");
    }
  }
  t.add_column("sqrt_g", "1/parameter^d");
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) t.add_column("g_" + std::to_string(i) + std::to_string(j), "1/parameter^2");
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<Json> row;
    detail::append_coords(row, grid, k);
    row.emplace_back(tab.profile.entropy[k]);
    if (with_lambda) {
      for (Eigen::Index i = 0; i < tab.profile.multipliers[k].size(); ++i) row.emplace_back(tab.profile.multipliers[k](i));
    }
    row.emplace_back(std::sqrt(tab.metric.det[k]));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) row.emplace_back(tab.metric.g[k](i, j));
    }
    t.add_row(std::move(row));
  }
  return t;
}

// Rows of a long-format density table: coords, pi, scalar_density, S, sqrt_g.
void append_density_rows(Table& t, const HyperDistribution& h, std::span<const double> entropy,
                         std::optional<double> alpha) {
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    std::vector<Json> row;
    if (alpha) row.emplace_back(*alpha);
    detail::append_coords(row, h.grid, k);
    row.emplace_back(h.pi[k]);
    row.emplace_back(detail::normalized_scalar(h, k));
    row.emplace_back(entropy[k]);
    row.emplace_back(h.sqrt_det(k));
    t.add_row(std::move(row));
  }
}

Table density_table(const std::string& name, const ParameterGrid& grid, bool with_alpha) {
  Table t{name, {}, {}, {}};
  if (with_alpha) t.add_column("alpha", "1");
  detail::add_coordinate_columns(t, grid);
  t.add_column("pi", "1/parameter^d");
  t.add_column("scalar_density", "1");
  t.add_column("S", "nats");
  t.add_column("sqrt_g", "1/parameter^d");
  return t;
}

Json hyper_summary(const HyperDistribution& h) {
  const HyperMoments m = moments(h);
  const std::size_t peak = argmax_scalar(h);
  Json j = Json::object();
  j["log_zeta"] = h.log_zeta;
  j["mean"] = to_json(m.mean);
  j["covariance"] = to_json(m.covariance);
  j["scalar_argmax"] = to_json(std::span<const double>(h.grid.coords(peak)));
  return j;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* c = dynamic_cast<const CliError*>(&e)) return c->exit_code();
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return err->kind() == ErrorKind::kUsage ? kExitSchema : kExitNumerical;
  }
  return kExitNumerical;
}

Bundle run_solve(const ModelSpec& spec) {
  if (!spec.targets) missing_block(spec, "constraints", "solve");
  Bundle b = start("solve", spec);
  SpacePtr space = build_space(spec.space);
  auto obs = build_observables(space, spec.observables);
  MaxEntSolution sol = [&] {
    PhaseTimer timer(b, "solve");
    return solve_lagrange(ConstraintSet(obs, *spec.targets), spec.solver);
  }();

  Eigen::VectorXd exp_neg = (-sol.lambda.array()).exp();
  b.results["lambda"] = to_json(sol.lambda);
  b.results["exp_neg_lambda"] = to_json(exp_neg);
  b.results["log_partition"] = sol.log_partition;
  b.results["entropy"] = sol.entropy;
  b.results["covariance"] = to_json(sol.covariance);
  b.results["residual"] = sol.residual;
  b.results["iterations"] = sol.iterations;
  b.results["degenerate"] = sol.degenerate;
  append_warnings(b, sol.warnings);

  Table mult{"multipliers", {}, {}, {}};
  mult.add_column("observable", "name");
  mult.add_column("target", "observable");
  mult.add_column("lambda", "1/observable");
  mult.add_column("exp_neg_lambda", "1");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    mult.add_row({obs[i].name(), (*spec.targets)[i], sol.lambda(ii), exp_neg(ii)});
  }
  Table p0{"p0", {}, {}, {}};
  p0.add_column("x", "state");
  p0.add_column("p", "1/volume");
  p0.add_column("m", "1");
  p0.add_column("dx", "volume");
  for (std::size_t k = 0; k < space->size(); ++k) {
    p0.add_row({space->points()[k], sol.distribution[k], space->measure()[k], space->cell_volumes()[k]});
  }
  Table trace{"dual_trace", {}, {}, {}};
  trace.add_column("iteration", "1");
  trace.add_column("dual", "nats");
  for (std::size_t i = 0; i < sol.dual_trace.size(); ++i) trace.add_row({static_cast<int>(i), sol.dual_trace[i]});
  b.tables = {std::move(mult), std::move(p0), std::move(trace)};
  return b;
}

Bundle run_prior(const ModelSpec& spec, const RunOptions& options) {
  if (!spec.family) missing_block(spec, "family", "prior");
  Bundle b = start("prior", spec);
  ModelFamily family = build_family(spec);
  const std::vector<double> alphas = options.alphas.value_or(spec.prior ? spec.prior->alphas : PriorSpec{}.alphas);
  if (alphas.empty()) throw CliError(kExitSchema, "--alpha: empty list");

  FamilyTable tab = [&] {
    PhaseTimer timer(b, "tabulate");
    return tabulate(family);
  }();
  const ParameterGrid& grid = tab.profile.grid;
  b.results["family"] = family.name();
  b.results["metric_method"] = to_string(tab.metric.method);
  b.results["grid_nodes"] = grid.size();

  PhaseTimer timer(b, "priors");
  Table pi = density_table("pi", grid, true);
  Json per_alpha = Json::array();
  for (double alpha : alphas) {
    HyperDistribution h = entropic_prior(tab.profile, tab.metric, alpha);
    append_density_rows(pi, h, tab.profile.entropy, alpha);
    Json j = Json::object();
    j["alpha"] = alpha;
    j["sigma"] = sigma_entropy(h, tab.profile);
    j.update(hyper_summary(h));
    Json slopes = Json::object();
    for (std::size_t i = 0; i < grid.dim(); ++i) {
      if (grid.axis(i).size() > 1 && grid.axis(i).nodes().front() > 0.0) {
        slopes[grid.axis(i).name()] = detail::loglog_slope(grid.axis(i).nodes(), marginal(h, i));
      }
    }
    j["marginal_loglog_slope"] = std::move(slopes);
    per_alpha.push_back(std::move(j));
  }
  b.results["priors"] = std::move(per_alpha);

  std::vector<double> others;
  std::copy_if(alphas.begin(), alphas.end(), std::back_inserter(others), [](double a) { return a != 1.0; });
  if (!others.empty()) {
    AlphaReport r = alpha_optimality_check(tab.profile, tab.metric, others);
    b.results["optimality"] = Json{{"alphas", r.alphas},         {"sigma", r.sigma},
                                   {"sigma_at_one", r.sigma_at_one}, {"margins", r.margins},
                                   {"tie", r.tie},               {"alpha_one_is_max", r.alpha_one_is_max}};
  }

  std::vector<Table> tables{profile_table(tab), std::move(pi)};
  if (spec.prior && !spec.prior->observations.empty()) {
    HyperDistribution prior = extended_me_posterior(tab.profile, tab.metric);
    HyperDistribution post = bayes_update(prior, family, spec.prior->observations);
    Json j = hyper_summary(post);
    j["observations"] = spec.prior->observations.size();
    b.results["posterior"] = std::move(j);
    Table t = density_table("posterior", grid, false);
    append_density_rows(t, post, tab.profile.entropy, std::nullopt);
    tables.push_back(std::move(t));
  }
  b.tables = std::move(tables);
  return b;
}

Bundle run_fluct(const ModelSpec& spec, const RunOptions& options) {
  if (!spec.fluct) missing_block(spec, "fluct", "fluct");
  if (options.finite_bath && !spec.fluct->bath) missing_block(spec, "fluct.bath", "fluct --finite-bath");
  Bundle b = start("fluct", spec);
  FluctuationScenario scenario = build_scenario(spec);
  FluctuationReport r = [&] {
    PhaseTimer timer(b, "analyze");
    return analyze(scenario, options.finite_bath);
  }();
  const ParameterGrid& grid = r.pi_A.grid;

  b.results["lambda0"] = spec.fluct->lambda0;
  b.results["metric"] = spec.fluct->metric;
  b.results["log_zeta"] = r.pi_A.log_zeta;
  b.results["hessian_deviation"] = r.profile.hessian_deviation;
  b.results["moments"] = Json{{"mean_A", to_json(r.moments.mean_A)},
                              {"mean_lambda", to_json(r.moments.mean_lambda)},
                              {"cov_A", to_json(r.moments.cov_A)},
                              {"cov_lambda", to_json(r.moments.cov_lambda)}};
  const Eigen::VectorXd lam0 = Eigen::Map<const Eigen::VectorXd>(spec.fluct->lambda0.data(),
                                                                 static_cast<Eigen::Index>(spec.fluct->lambda0.size()));
  b.results["peak"] = Json{{"node", r.peak.node},
                           {"A0", to_json(r.peak.A0)},
                           {"lambda_at_node", to_json(r.peak.lambda_at_node)},
                           {"stationarity_gap", (r.peak.lambda_at_node - lam0).lpNorm<Eigen::Infinity>()},
                           {"lambda_cell_bound", r.peak.lambda_cell_bound}};
  b.results["correlation"] = Json{{"direct", to_json(r.correlation.direct)},
                                  {"formula", to_json(r.correlation.formula)},
                                  {"agreement", r.correlation.agreement},
                                  {"canonical_deviation", r.correlation.canonical_deviation},
                                  {"steps", r.correlation.steps}};
  b.results["gaussian"] = Json{{"total_variation", r.gaussian.total_variation},
                               {"local_maxima", r.gaussian.local_maxima}};
  append_warnings(b, r.gaussian.warnings);
  append_warnings(b, r.warnings);

  Table pi = density_table("pi_A", grid, false);
  append_density_rows(pi, r.pi_A, r.profile.profile.entropy, std::nullopt);
  std::vector<Table> tables{std::move(pi)};

  if (r.bath) {
    b.results["finite_bath"] = Json{{"lambda0", to_json(*r.bath_lambda0)},
                                    {"total_variation", *r.bath_total_variation},
                                    {"excluded_nodes", r.bath->excluded}};
    append_warnings(b, r.bath->warnings);
    HyperDistribution large = fluctuation_distribution(r.profile, std::span<const double>(r.bath_lambda0->data(),
                                                                                          r.bath_lambda0->size()));
    Table t{"bath_pi_A", {}, {}, {}};
    detail::add_coordinate_columns(t, grid);
    t.add_column("pi_bath", "1/parameter^d");
    t.add_column("pi_large_bath", "1/parameter^d");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      std::vector<Json> row;
      detail::append_coords(row, grid, k);
      row.emplace_back(r.bath->pi_A.pi[k]);
      row.emplace_back(large.pi[k]);
      t.add_row(std::move(row));
    }
    tables.push_back(std::move(t));
  }

  if (!spec.fluct->scan_units.empty()) {
    PhaseTimer timer(b, "scan");
    Table t{"scan", {}, {}, {}};
    t.add_column("units", "1");
    t.add_column("agreement", "1");
    t.add_column("canonical_deviation", "1");
    t.add_column("gaussian_total_variation", "1");
    for (int units : spec.fluct->scan_units) {
      FluctuationReport s = analyze(build_scenario(spec, units), false);
      t.add_row({units, s.correlation.agreement, s.correlation.canonical_deviation, s.gaussian.total_variation});
    }
    tables.push_back(std::move(t));
  }
  b.tables = std::move(tables);
  return b;
}

Bundle run_repeat(const ModelSpec& spec, const RunOptions& options) {
  if (!spec.family) missing_block(spec, "family", "repeat");
  Bundle b = start("repeat", spec);
  ModelFamily family = build_family(spec);
  const RepeatSpec rs = spec.repeat.value_or(RepeatSpec{});
  const int n = options.n.value_or(rs.n);
  if (n < 1) throw CliError(kExitSchema, "--n must be at least 1");

  PhaseTimer timer(b, "repeat");
  RepeatReport rep = repeat_family(family, n);
  ConsistencyReport cons = consistency_constrained_prior(family, n);
  HyperDistribution base = extended_me_posterior(rep.base.profile, rep.base.metric);
  double prior_gap = 0.0, pi_max = 0.0;
  for (std::size_t k = 0; k < base.pi.size(); ++k) {
    prior_gap = std::max(prior_gap, std::abs(cons.prior.pi[k] - base.pi[k]));
    pi_max = std::max(pi_max, base.pi[k]);
  }

  b.results["n"] = n;
  b.results["entropy_deviation"] = rep.entropy_deviation;
  b.results["metric_deviation"] = rep.metric_deviation;
  b.results["consistency_deviation"] = cons.max_relative_deviation;
  b.results["constrained_prior_deviation"] = prior_gap / pi_max;

  Table scan{"naive_scan", {}, {}, {}};
  scan.add_column("n", "1");
  scan.add_column("variance", "parameter^2");
  std::vector<double> variances;
  for (int m : rs.scan) {
    const HyperDistribution naive = m == 1 ? base : repeat_family(family, m).naive_prior;
    variances.push_back(moments(naive).covariance.trace());
    scan.add_row({m, variances.back()});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < variances.size(); ++i) decreasing = decreasing && variances[i] < variances[i - 1];
  b.results["naive_variances"] = variances;
  b.results["naive_concentrates"] = decreasing;

  const ParameterGrid& grid = rep.base.profile.grid;
  Table t{"repeat", {}, {}, {}};
  detail::add_coordinate_columns(t, grid);
  t.add_column("S1", "nats");
  t.add_column("Sn", "nats");
  t.add_column("sqrt_g1", "1/parameter^d");
  t.add_column("sqrt_gn", "1/parameter^d");
  t.add_column("pi1", "1/parameter^d");
  t.add_column("pi_naive", "1/parameter^d");
  t.add_column("pi_constrained", "1/parameter^d");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<Json> row;
    detail::append_coords(row, grid, k);
    row.insert(row.end(), {rep.base.profile.entropy[k], rep.product.profile.entropy[k], std::sqrt(rep.base.metric.det[k]),
                           std::sqrt(rep.product.metric.det[k]), base.pi[k], rep.naive_prior.pi[k], cons.prior.pi[k]});
    t.add_row(std::move(row));
  }
  b.tables = {std::move(t), std::move(scan)};
  return b;
}

Bundle run(const std::string& command, const std::vector<ModelSpec>& specs, const RunOptions& options) {
  if (specs.empty()) throw CliError(kExitSchema, "no spec given");
  if (command == "check") return run_check(specs);
  if (specs.size() != 1) throw CliError(kExitSchema, "'" + command + "' takes exactly one --spec");
  const ModelSpec& spec = specs.front();
  if (command == "solve") return run_solve(spec);
  if (command == "prior") return run_prior(spec, options);
  if (command == "fluct") return run_fluct(spec, options);
  if (command == "repeat") return run_repeat(spec, options);
  throw CliError(kExitSchema, "unknown command '" + command + "'");
}

}  // namespace hyperme::cli
