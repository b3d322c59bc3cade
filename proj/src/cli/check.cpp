// The `check` subcommand: every applicable invariant for each spec, one
// pass/fail record per property.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "common.hpp"
#include "hyperme/cli/commands.hpp"
#include "hyperme/error.hpp"
#include "hyperme/fluctuations.hpp"

namespace hyperme::cli {
namespace {

using detail::PhaseTimer;

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct CheckRecord {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

class Suite {
 public:
  /// value <= tolerance (NaN fails).
  void at_most(const std::string& name, double value, double tolerance, std::string detail = "") {
    records_.push_back({name, value <= tolerance, value, tolerance, std::move(detail)});
  }
  void holds(const std::string& name, bool pass, double value, std::string detail = "") {
    records_.push_back({name, pass, value, 0.0, std::move(detail)});
  }
  // Runs a group; an engine error becomes a failing "<group>.error" record.
  template <class F>
  void group(const std::string& name, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      records_.push_back({name + ".error", false, std::nan(""), 0.0, e.what()});
    }
  }
  const std::vector<CheckRecord>& records() const { return records_; }

 private:
  std::vector<CheckRecord> records_;
};

// mt19937_64 is specified bit-exactly; the std distributions are not, so
// uniforms are built from the raw 53 high bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

double max_abs(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double rel_max(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  return (a - ref).lpNorm<Eigen::Infinity>() / ref.lpNorm<Eigen::Infinity>();
}

std::vector<std::size_t> sample_nodes(std::size_t n, std::size_t count) {
  if (n <= count) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                                                        static_cast<double>(count - 1))));
  }
  return out;
}

Eigen::VectorXd as_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------------------
// Canonical solve at the spec's targets

void check_solver(Suite& s, const ModelSpec& spec) {
  SpacePtr space = build_space(spec.space);
  auto obs = build_observables(space, spec.observables);
  const std::vector<double>& targets = *spec.targets;
  const MaxEntSolution sol = solve_lagrange(ConstraintSet(obs, targets), spec.solver);
  const Eigen::VectorXd A = as_vector(targets);
  const std::size_t n_a = obs.size();

  s.at_most("solver.residual", sol.residual, spec.solver.tolerance);
  s.at_most("solver.legendre", std::abs(relative_entropy(sol.distribution) - (sol.log_partition + sol.lambda.dot(A))),
            1e-9, "S[p] against log Z + lambda . A");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sol.covariance);
  const double scale = std::max(sol.covariance.lpNorm<Eigen::Infinity>(), 1e-300);
  const double asym = (sol.covariance - sol.covariance.transpose()).lpNorm<Eigen::Infinity>() / scale;
  s.at_most("solver.covariance_psd", std::max(asym, -eig.eigenvalues().minCoeff() / scale), 1e-12);

  // C = -dA/dlambda by central differences of canonical means.
  Eigen::MatrixXd fd(n_a, n_a);
  for (std::size_t b = 0; b < n_a; ++b) {
    const double h = 1e-5 * std::max(1.0, std::abs(sol.lambda(b)));
    Eigen::VectorXd lp = sol.lambda, lm = sol.lambda;
    lp(b) += h;
    lm(b) -= h;
    const auto cp = canonical_at(space, obs, as_std(lp));
    const auto cm = canonical_at(space, obs, as_std(lm));
    for (std::size_t a = 0; a < n_a; ++a) {
      fd(a, b) = -(expectation(cp.distribution, obs[a]) - expectation(cm.distribution, obs[a])) / (2.0 * h);
    }
  }
  s.at_most("solver.covariance_fd", rel_max(fd, sol.covariance), 1e-5);

  // dS/dA = lambda by central differences over A, step 1e-4 * observable range.
  double grad_err = 0.0;
  for (std::size_t a = 0; a < n_a; ++a) {
    const auto v = obs[a].values();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < space->size(); ++k) {
      if (!space->in_support(k)) continue;
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    const double h = std::min(1e-4 * (hi - lo), 0.5 * std::min(A(a) - lo, hi - A(a)));
    std::vector<double> tp = targets, tm = targets;
    tp[a] += h;
    tm[a] -= h;
    const double dS = (solve_lagrange(ConstraintSet(obs, tp), spec.solver).entropy -
                       solve_lagrange(ConstraintSet(obs, tm), spec.solver).entropy) /
                      (2.0 * h);
    grad_err = std::max(grad_err, std::abs(dS - sol.lambda(a)) / std::max(std::abs(sol.lambda(a)), 1e-3));
  }
  s.at_most("solver.entropy_gradient", grad_err, 1e-5, "relative to max(|lambda|, 1e-3)");

  double rise = -std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (std::size_t i = 1; i < sol.dual_trace.size(); ++i) {
    const double d = sol.dual_trace[i] - sol.dual_trace[i - 1];
    rise = std::max(rise, d);
    monotone = monotone && d <= sol.dual_band[i];
  }
  s.holds("solver.dual_descent", monotone, sol.dual_trace.size() > 1 ? rise : 0.0,
          "largest per-step change of the dual; rises allowed only inside the rounding band");

  // Midpoint concavity on the segment from A to the measure mean (interior).
  const Distribution m0 = normalized_measure(space);
  Eigen::VectorXd centre(n_a);
  for (std::size_t a = 0; a < n_a; ++a) centre(a) = expectation(m0, obs[a]);
  auto S_at = [&](double t) {
    return solve_lagrange(ConstraintSet(obs, as_std((1.0 - t) * A + t * centre)), spec.solver).entropy;
  };
  double worst = -std::numeric_limits<double>::infinity();
  for (double t0 : {0.0, 0.25, 0.5}) {
    const double t1 = t0 + 0.5;
    worst = std::max(worst, 0.5 * (S_at(t0) + S_at(t1)) - S_at(0.5 * (t0 + t1)));
  }
  s.at_most("solver.concavity", worst, 1e-9, "max of chord midpoint minus S(midpoint)");

  if (space->size() <= 64) {
    const Distribution bf = brute_force_maxent(space, obs, targets);
    s.at_most("solver.brute_force", max_abs(sol.distribution.density(), bf.density()), 1e-6);
  }

  if (spec.expect) {
    const ExpectSpec& e = *spec.expect;
    if (e.lambda) s.at_most("expect.lambda", std::abs(sol.lambda(0) - *e.lambda), e.tolerance);
    if (e.exp_neg_lambda) {
      s.at_most("expect.exp_neg_lambda", std::abs(std::exp(-sol.lambda(0)) - *e.exp_neg_lambda), e.tolerance);
    }
    if (e.entropy) s.at_most("expect.entropy", std::abs(sol.entropy - *e.entropy), e.tolerance);
    if (e.log_partition) s.at_most("expect.log_partition", std::abs(sol.log_partition - *e.log_partition), e.tolerance);
    if (!e.distribution.empty()) {
      if (e.distribution.size() != space->size()) throw CliError(kExitSchema, "$.expect.distribution: wrong length");
      s.at_most("expect.distribution", max_abs(sol.distribution.density(), e.distribution), e.tolerance);
    }
  }
}

// ---------------------------------------------------------------------------
// Randomized small spaces

struct RandomInstance {
  SpacePtr space;
  std::vector<Observable> observables;
  std::vector<double> density;
  std::vector<double> targets;
};

RandomInstance random_instance(Rng& rng) {
  const int n = rng.integer(3, 10);
  const int n_obs = rng.integer(1, 2);
  std::vector<double> x(n), dx(n), m(n), w(n);
  for (int k = 0; k < n; ++k) {
    x[k] = k;
    dx[k] = rng.uniform(0.5, 1.5);
    m[k] = rng.uniform(0.1, 1.0);
  }
  RandomInstance r;
  r.space = SampleSpace::create(x, dx, m);
  for (int a = 0; a < n_obs; ++a) {
    std::vector<double> v(n);
    for (auto& e : v) e = rng.uniform(-1.0, 1.0);
    r.observables.emplace_back(r.space, v, "a" + std::to_string(a));
  }
  for (auto& e : w) e = rng.uniform(0.05, 1.0);
  const Distribution p = normalize(r.space, w);
  r.density.assign(p.density().begin(), p.density().end());
  for (const auto& o : r.observables) r.targets.push_back(expectation(p, o));
  return r;
}

void check_random(Suite& s, const OracleSpec& oracle) {
  Rng rng(oracle.seed);
  double bf_err = 0.0, bound_gap = -std::numeric_limits<double>::infinity(), equality = 0.0, linearity = 0.0,
         idempotent = 0.0, refinement = 0.0;
  for (int i = 0; i < oracle.random_instances; ++i) {
    const RandomInstance r = random_instance(rng);
    const Distribution p(r.space, r.density);

    const MaxEntSolution sol = solve_lagrange(ConstraintSet(r.observables, r.targets));
    const Distribution bf = brute_force_maxent(r.space, r.observables, r.targets);
    bf_err = std::max(bf_err, max_abs(sol.distribution.density(), bf.density()));

    const double log_mass = r.space->log_total_mass();
    bound_gap = std::max(bound_gap, relative_entropy(p) - log_mass);
    equality = std::max(equality, std::abs(relative_entropy(normalized_measure(r.space)) - log_mass));

    const double c1 = rng.uniform(-2.0, 2.0), c2 = rng.uniform(-2.0, 2.0);
    const auto a = r.observables.front().values();
    std::vector<double> b(a.size()), comb(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      b[k] = rng.uniform(-1.0, 1.0);
      comb[k] = c1 * a[k] + c2 * b[k];
    }
    const Observable ob(r.space, b, "b"), oc(r.space, comb, "c");
    linearity = std::max(linearity, std::abs(expectation(p, oc) - c1 * expectation(p, r.observables.front()) -
                                             c2 * expectation(p, ob)));

    std::vector<double> f(a.size());
    for (auto& e : f) e = rng.uniform(0.0, 5.0);
    const Distribution once = normalize(r.space, f);
    const Distribution twice = normalize(r.space, once.density());
    double rel = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) rel = std::max(rel, std::abs(twice[k] - once[k]) / once[k]);
    idempotent = std::max(idempotent, rel);

    // Split one cell into two equal halves carrying the same m and p.
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<int>(a.size()) - 1));
    std::vector<double> x2, dx2, m2, p2;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const int copies = k == j ? 2 : 1;
      for (int c = 0; c < copies; ++c) {
        x2.push_back(static_cast<double>(x2.size()));
        dx2.push_back(r.space->cell_volumes()[k] / copies);
        m2.push_back(r.space->measure()[k]);
        p2.push_back(p[k]);
      }
    }
    const SpacePtr fine = SampleSpace::create(x2, dx2, m2);
    refinement = std::max(refinement, std::abs(relative_entropy(Distribution(fine, p2)) - relative_entropy(p)));
  }
  const std::string n = std::to_string(oracle.random_instances) + " random instances";
  s.at_most("oracle.random_brute_force", bf_err, 1e-6, n);
  s.at_most("prob.entropy_bound", bound_gap, 0.0, "max of S[p] - log sum m dx");
  s.at_most("prob.entropy_bound_equality", equality, 1e-12, "p proportional to m");
  s.at_most("prob.expectation_linearity", linearity, 1e-12);
  s.at_most("prob.normalize_idempotent", idempotent, 1e-12);
  s.at_most("prob.refinement", refinement, 1e-12);
}

// ---------------------------------------------------------------------------
// Families, metric and hyperdistributions

double interval_gap(const HyperDistribution& h, const HyperDistribution& image, bool reversed) {
  const std::size_t n = h.grid.size();
  double worst = 0.0;
  for (std::size_t i : sample_nodes(n, 12)) {
    for (std::size_t j : sample_nodes(n, 12)) {
      if (j <= i) continue;
      const std::size_t ii = reversed ? n - 1 - j : i, jj = reversed ? n - 1 - i : j;
      worst = std::max(worst, std::abs(interval_probability(h, i, j) - interval_probability(image, ii, jj)));
    }
  }
  return worst;
}

double volume_gap(const MetricField& field, const MetricField& image, bool reversed) {
  auto volume = [](const MetricField& f, std::size_t i, std::size_t j) {
    const auto x = f.grid.axis(0).nodes();
    double v = 0.0;
    for (std::size_t k = i; k < j; ++k) v += 0.5 * (std::sqrt(f.det[k]) + std::sqrt(f.det[k + 1])) * (x[k + 1] - x[k]);
    return v;
  };
  const std::size_t n = field.grid.size();
  double worst = 0.0;
  for (std::size_t i : sample_nodes(n, 12)) {
    for (std::size_t j : sample_nodes(n, 12)) {
      if (j <= i) continue;
      const std::size_t ii = reversed ? n - 1 - j : i, jj = reversed ? n - 1 - i : j;
      const double v = volume(field, i, j);
      worst = std::max(worst, std::abs(v - volume(image, ii, jj)) / v);
    }
  }
  return worst;
}

Reparametrization make_map(const ReparamSpec& r) {
  if (r.map == "square") return Reparametrization::square();
  if (r.map == "scale") return Reparametrization::scale(r.factor);
  return Reparametrization::identity();
}

void check_reparametrization(Suite& s, const std::string& prefix, const HyperDistribution& h, const ReparamSpec& r) {
  if (h.grid.dim() != 1) throw CliError(kExitSchema, "$.reparametrize: needs a one-dimensional grid");
  const Reparametrization phi = make_map(r);
  const HyperDistribution image = reparametrize(h, phi);
  const auto x = h.grid.axis(0).nodes();
  const bool reversed = x.size() > 1 && phi.forward(0, x.back()) < phi.forward(0, x.front());
  s.at_most(prefix + ".reparametrization", interval_gap(h, image, reversed), r.tolerance,
            "interval probabilities under '" + phi.name + "'");
  if (prefix == "hyper") {
    s.at_most("geometry.volume_covariance", volume_gap(h.metric, image.metric, reversed), r.tolerance,
              "relative sqrt(g) volume of intervals under '" + phi.name + "'");
  }
}

std::vector<double> draw(Rng& rng, const Distribution& p, int count) {
  const auto& space = p.space();
  std::vector<double> cdf(space.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < space.size(); ++k) cdf[k] = acc += p[k] * space.cell_volumes()[k];
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform(0.0, acc);
    const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    out.push_back(space.points()[std::min(k, space.size() - 1)]);
  }
  return out;
}

void check_family(Suite& s, const ModelSpec& spec) {
  const ModelFamily family = build_family(spec);
  const FamilyTable tab = tabulate(family);
  const ParameterGrid& grid = tab.profile.grid;
  const std::size_t d = grid.dim();

  double sym = 0.0;
  for (const auto& g : tab.metric.g) {
    const double scale = std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    sym = std::max({sym, (g - g.transpose()).lpNorm<Eigen::Infinity>() / scale, -eig.eigenvalues().minCoeff() / scale});
  }
  s.at_most("geometry.symmetric_psd", sym, 1e-12, "asymmetry and negative eigenvalues relative to ||g||");

  const auto nodes = sample_nodes(grid.size(), 25);
  if (family.kind() == FamilyKind::kByTarget) {
    double score = 0.0, hess = 0.0, grad = 0.0;
    for (std::size_t k : nodes) {
      const auto theta = grid.coords(k);
      const MaxEntSolution sol = family.solve(theta);
      const Eigen::MatrixXd cinv = sol.covariance.inverse();
      score = std::max(score, rel_max(fisher_metric(family, theta, MetricMethod::kFiniteDifference), cinv));
      hess = std::max(hess, rel_max(hessian_entropy(family, theta), cinv));
      for (std::size_t i = 0; i < d; ++i) {
        const double h = stencil_step(grid.axis(i), theta[i]);
        std::vector<double> tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double dS = (family.solve(tp).entropy - family.solve(tm).entropy) / (2.0 * h);
        grad = std::max(grad, std::abs(dS - sol.lambda(i)) / std::max(std::abs(sol.lambda(i)), 1e-3));
      }
    }
    const std::string where = std::to_string(nodes.size()) + " nodes";
    s.at_most("geometry.duality_score_metric", score, 1e-4, "finite-difference Fisher metric vs C^-1, " + where);
    s.at_most("geometry.duality_entropy_hessian", hess, 1e-4, "-d2S/dA2 vs C^-1, " + where);
    s.at_most("geometry.entropy_gradient", grad, 1e-5, "dS/dA vs lambda relative to max(|lambda|, 1e-3), " + where);
  }

  const bool gaussian = spec.family->kind == "gaussian";
  if (gaussian) {
    double dev = 0.0;
    for (std::size_t k : nodes) {
      const double sigma = grid.coords(k)[1];
      Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(2, 2);
      exact(0, 0) = 1.0 / (sigma * sigma);
      exact(1, 1) = 2.0 / (sigma * sigma);
      dev = std::max(dev, rel_max(tab.metric.g[k], exact));
    }
    s.at_most("geometry.gaussian_metric", dev, 1e-4, "g = diag(1, 2) / sigma^2");
  }

  const HyperDistribution h1 = extended_me_posterior(tab.profile, tab.metric);
  double mass = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) mass += h1.pi[k] * grid.weight(k);
  s.at_most("hyper.normalization", std::abs(mass - 1.0), 1e-12);

  const auto s_max = static_cast<std::size_t>(
      std::max_element(tab.profile.entropy.begin(), tab.profile.entropy.end()) - tab.profile.entropy.begin());
  bool aligned = true;
  for (double alpha : {0.5, 1.0, 2.0}) aligned = aligned && argmax_scalar(entropic_prior(tab.profile, tab.metric, alpha)) == s_max;
  s.holds("hyper.argmax_alignment", aligned, static_cast<double>(s_max), "alpha in {0.5, 1, 2}");

  s.at_most("hyper.sigma_identity", std::abs(sigma_entropy(h1, tab.profile) - h1.log_zeta), 1e-8);

  std::vector<double> alphas{0.5, 0.9, 1.1, 1.5, 2.0};
  if (spec.prior) {
    for (double a : spec.prior->alphas) {
      if (a != 1.0 && std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
    }
  }
  const AlphaReport opt = alpha_optimality_check(tab.profile, tab.metric, alphas);
  const double min_margin = *std::min_element(opt.margins.begin(), opt.margins.end());
  s.holds("hyper.alpha_optimality", opt.alpha_one_is_max || opt.tie, min_margin,
          opt.tie ? "flat entropy: every margin is a tie" : "smallest sigma(1) - sigma(alpha)");

  if (spec.reparametrize) check_reparametrization(s, "hyper", h1, *spec.reparametrize);

  if (gaussian) {
    const std::vector<double> marg = marginal(h1, 1);
    s.at_most("hyper.gaussian_slope", std::abs(detail::loglog_slope(grid.axis(1).nodes(), marg) + 1.0), 1e-3,
              "log-log slope of the sigma marginal against -1");
    double worst = 0.0;
    const double c = std::sqrt(4.0 * M_PI * std::exp(1.0));
    for (std::size_t k : nodes) {
      const double sigma = grid.coords(k)[1];
      worst = std::max(worst, std::abs(std::exp(tab.profile.entropy[k]) * h1.sqrt_det(k) * sigma - c) / c);
    }
    s.at_most("hyper.gaussian_constant", worst, 1e-4, "e^S g^1/2 sigma against sqrt(4 pi e)");
  }

  if (spec.prior && family.exponential() && d == 1) {
    Rng rng(spec.oracle ? spec.oracle->seed : 1);
    const std::size_t truth = grid.size() / 3;
    const Distribution p_true = family.evaluate_node(truth);
    std::vector<double> sd;
    for (int n : {10, 100, 1000}) {
      const HyperDistribution post = bayes_update(h1, family, draw(rng, p_true, n));
      sd.push_back(std::sqrt(moments(post).covariance(0, 0)));
    }
    s.holds("hyper.bayes_concentration", sd[1] < sd[0] && sd[2] < sd[1], sd[2],
            "posterior sd over 10, 100, 1000 draws");
  }

  if (spec.repeat) {
    double ent = 0.0, met = 0.0;
    for (int n : {2, 3}) {
      const RepeatReport r = repeat_family(family, n);
      ent = std::max(ent, r.entropy_deviation);
      met = std::max(met, r.metric_deviation);
    }
    s.at_most("repeat.entropy_additivity", ent, 1e-9, "S^(n) = n S^(1), n in {2, 3}");
    s.at_most("repeat.metric_additivity", met, 1e-9, "g^(n) = n g^(1), n in {2, 3}");

    std::vector<double> var;
    for (int n : spec.repeat->scan) {
      const HyperDistribution naive = n == 1 ? h1 : repeat_family(family, n).naive_prior;
      var.push_back(moments(naive).covariance.trace());
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < var.size(); ++i) decreasing = decreasing && var[i] < var[i - 1];
    s.holds("repeat.naive_concentration", decreasing, var.back(), "variance of pi^(n) strictly decreasing over the scan");

    double cons = 0.0, gap = 0.0;
    for (int n : {2, spec.repeat->n}) {
      const ConsistencyReport c = consistency_constrained_prior(family, n);
      cons = std::max(cons, c.max_relative_deviation);
      double pmax = 0.0, dev = 0.0;
      for (std::size_t k = 0; k < h1.pi.size(); ++k) {
        pmax = std::max(pmax, h1.pi[k]);
        dev = std::max(dev, std::abs(c.prior.pi[k] - h1.pi[k]));
      }
      gap = std::max(gap, dev / pmax);
    }
    s.at_most("repeat.consistency", std::max(cons, gap), 1e-12, "constrained pi^(n) against pi^(1)");
  }
}

// ---------------------------------------------------------------------------
// Fluctuations

void check_fluct(Suite& s, const ModelSpec& spec) {
  const FluctuationScenario sc = build_scenario(spec);
  const FluctuationReport r = analyze(sc, false);
  const ParameterGrid& grid = r.pi_A.grid;
  if (sc.metric == FluctuationMetric::kEntropyHessian) {
    s.at_most("fluct.hessian_identity", r.profile.hessian_deviation, 1e-4, "-d2S/dA2 against C^-1 at every node");
  }
  double mass = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) mass += r.pi_A.pi[k] * grid.weight(k);
  s.at_most("fluct.normalization", std::abs(mass - 1.0), 1e-12);
  const double gap = (r.peak.lambda_at_node - as_vector(sc.lambda0)).lpNorm<Eigen::Infinity>();
  s.at_most("fluct.stationarity", gap, r.peak.lambda_cell_bound, "|lambda(A0) - lambda0| against the cell bound");
  s.at_most("fluct.correlation_agreement", r.correlation.agreement, 1e-4, "direct quadrature against the formula");

  if (!spec.fluct->scan_units.empty()) {
    std::vector<double> canon, tv;
    std::string detail = "units";
    for (int units : spec.fluct->scan_units) {
      const FluctuationReport sr = analyze(build_scenario(spec, units), false);
      canon.push_back(sr.correlation.canonical_deviation);
      tv.push_back(sr.gaussian.total_variation);
      detail += " " + std::to_string(units);
    }
    auto decreasing = [](const std::vector<double>& v) {
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] < v[i - 1])) return false;
      }
      return true;
    };
    s.holds("fluct.canonical_monotone", decreasing(canon), canon.back(), "|<dl dA> + 1| decreasing over " + detail);
    s.holds("fluct.gaussian_monotone", decreasing(tv), tv.back(), "TV to the Gaussian decreasing over " + detail);
  }
  if (spec.reparametrize) check_reparametrization(s, "fluct", r.pi_A, *spec.reparametrize);
}

}  // namespace

Bundle run_check(const std::vector<ModelSpec>& specs) {
  Bundle b;
  b.command = "check";
  b.spec_name = specs.size() == 1 ? specs.front().name : "check";
  std::string hashes;
  for (const auto& spec : specs) hashes += hex_hash(spec.hash);
  b.spec_hash = specs.size() == 1 ? specs.front().hash : fnv1a(hashes);

  Table t{"checks", {}, {}, {}};
  t.add_column("spec", "name");
  t.add_column("check", "name");
  t.add_column("pass", "bool");
  t.add_column("value", "1");
  t.add_column("tolerance", "1");

  Json per_spec = Json::array();
  std::size_t total = 0, failed = 0;
  for (const ModelSpec& spec : specs) {
    Suite s;
    {
      PhaseTimer timer(b, spec.name);
      if (spec.targets) s.group("solver", [&] { check_solver(s, spec); });
      if (spec.oracle) s.group("oracle", [&] { check_random(s, *spec.oracle); });
      if (spec.family) s.group("family", [&] { check_family(s, spec); });
      if (spec.fluct) s.group("fluct", [&] { check_fluct(s, spec); });
    }
    if (s.records().empty()) {
      throw CliError(kExitSchema, spec.source + ": nothing to check (no constraints, oracle, family or fluct block)");
    }
    Json checks = Json::array();
    for (const CheckRecord& c : s.records()) {
      checks.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance},
                            {"detail", c.detail}});
      t.add_row({spec.name, c.name, c.pass, c.value, c.tolerance});
      ++total;
      if (!c.pass) ++failed;
    }
    per_spec.push_back(Json{{"spec", spec.name}, {"spec_hash", hex_hash(spec.hash)}, {"checks", std::move(checks)}});
  }
  b.results["specs"] = std::move(per_spec);
  b.results["total"] = total;
  b.results["failed"] = failed;
  b.results["passed"] = failed == 0;
  b.tables.push_back(std::move(t));
  b.exit_code = failed == 0 ? kExitOk : kExitCheckFailed;
  return b;
}

}  // namespace hyperme::cli
