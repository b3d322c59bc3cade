#include "hyperme/maxent_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperme/error.hpp"
#include "hyperme/kernels.hpp"

namespace hyperme {
namespace {

constexpr const char* kModule = "maxent-solver";
constexpr double kDivergenceBound = 1e3;
constexpr double kEigenFloor = 1e-12;
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr int kPolishSteps = 3;

// Moments of the canonical distribution at one multiplier vector.
struct DualState {
  double log_z = 0.0;
  std::vector<double> cell_prob;  // q_k = dx_k p_k
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

void exponent(const SampleSpace& space, std::span<const Observable> obs,
              std::span<const double> lambda, std::vector<double>& y) {
  const auto lw = space.log_weight();
  y.assign(lw.begin(), lw.end());
  for (std::size_t a = 0; a < obs.size(); ++a) {
    if (lambda[a] != 0.0) kernels::axpy(-lambda[a], obs[a].values(), y);
  }
}

double dual_value(const SampleSpace& space, std::span<const Observable> obs,
                  const Eigen::VectorXd& lambda, const Eigen::VectorXd& targets, std::vector<double>& y) {
  exponent(space, obs, std::span<const double>(lambda.data(), lambda.size()), y);
  return kernels::log_sum_exp(y) + lambda.dot(targets);
}

DualState evaluate(const SampleSpace& space, std::span<const Observable> obs,
                   const Eigen::VectorXd& lambda, std::vector<double>& y) {
  DualState s;
  exponent(space, obs, std::span<const double>(lambda.data(), lambda.size()), y);
  s.log_z = kernels::log_sum_exp(y);
  s.cell_prob.resize(y.size());
  kernels::exp_shifted(y, s.log_z, s.cell_prob);

  const auto n_a = static_cast<Eigen::Index>(obs.size());
  s.mean.resize(n_a);
  for (Eigen::Index a = 0; a < n_a; ++a) s.mean(a) = kernels::dot(s.cell_prob, obs[a].values());

  std::vector<std::vector<double>> centered(obs.size());
  for (Eigen::Index a = 0; a < n_a; ++a) {
    const auto v = obs[a].values();
    centered[a].resize(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) centered[a][k] = v[k] - s.mean(a);
  }
  s.cov.resize(n_a, n_a);
  for (Eigen::Index a = 0; a < n_a; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      s.cov(a, b) = s.cov(b, a) = kernels::dot3(s.cell_prob, centered[a], centered[b]);
    }
  }
  return s;
}

Distribution to_distribution(const SpacePtr& space, const std::vector<double>& cell_prob) {
  std::vector<double> density(cell_prob.size());
  const auto dx = space->cell_volumes();
  for (std::size_t k = 0; k < density.size(); ++k) density[k] = cell_prob[k] / dx[k];
  return Distribution(space, std::move(density));
}

// Componentwise hull test on the support of m.
void check_box_feasibility(const SampleSpace& space, std::span<const Observable> obs,
                           std::span<const double> targets, double margin) {
  for (std::size_t a = 0; a < obs.size(); ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    const auto v = obs[a].values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!space.in_support(k)) continue;
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    const double eps = margin * std::max(1.0, hi - lo);
    if (!(targets[a] > lo + eps && targets[a] < hi - eps)) {
      std::ostringstream os;
      os.precision(17);
      os << "infeasible target: " << obs[a].name() << " = " << targets[a]
         << " is not strictly inside the feasible range (" << lo << ", " << hi << ")";
      throw InfeasibleError(kModule, os.str(), static_cast<int>(a));
    }
  }
}

struct NewtonStep {
  Eigen::VectorXd direction;
  double null_gradient = 0.0;  // gradient norm in the floored eigenspace
  bool floored = false;
};

NewtonStep newton_step(const Eigen::MatrixXd& cov, const Eigen::VectorXd& grad) {
  NewtonStep step;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues();
  const Eigen::MatrixXd& v = es.eigenvectors();
  const double floor = kEigenFloor * std::max(cov.trace(), std::numeric_limits<double>::min());
  step.direction = Eigen::VectorXd::Zero(grad.size());
  double null_sq = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double proj = v.col(i).dot(grad);
    if (ev(i) > floor) {
      step.direction -= v.col(i) * (proj / ev(i));
    } else {
      step.floored = true;
      null_sq += proj * proj;
    }
  }
  step.null_gradient = std::sqrt(null_sq);
  return step;
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tolerance > 0.0)) throw Error(ErrorKind::kUsage, kModule, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::kUsage, kModule, "max_iterations must be >= 1");
  if (!(damping > 0.0 && damping < 1.0)) throw Error(ErrorKind::kUsage, kModule, "damping must lie in (0, 1)");
  if (!(feasibility_margin >= 0.0)) throw Error(ErrorKind::kUsage, kModule, "feasibility_margin must be >= 0");
}

double log_partition(std::span<const double> lambda, const SampleSpace& space,
                     std::span<const Observable> observables) {
  if (lambda.size() != observables.size()) {
    throw Error(ErrorKind::kUsage, kModule, "log_partition: one multiplier per observable required");
  }
  std::vector<double> y;
  exponent(space, observables, lambda, y);
  return kernels::log_sum_exp(y);
}

MaxEntSolution canonical_at(const SpacePtr& space, std::span<const Observable> observables,
                            std::span<const double> lambda) {
  if (lambda.size() != observables.size()) {
    throw Error(ErrorKind::kUsage, kModule, "canonical_at: one multiplier per observable required");
  }
  for (double l : lambda) {
    if (!std::isfinite(l)) throw Error(ErrorKind::kDomain, kModule, "multipliers must be finite");
  }
  Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  std::vector<double> y;
  DualState s = evaluate(*space, observables, lam, y);
  return MaxEntSolution{
      .lambda = lam,
      .log_partition = s.log_z,
      .distribution = to_distribution(space, s.cell_prob),
      .entropy = s.log_z + lam.dot(s.mean),
      .covariance = s.cov,
      .residual = 0.0,
      .iterations = 0,
      .degenerate = false,
      .dual_trace = {},
      .dual_band = {},
      .warnings = {},
  };
}

MaxEntSolution solve_lagrange(const ConstraintSet& constraints, const SolverOptions& options) {
  options.validate();
  const SpacePtr& space = constraints.space_ptr();
  const auto obs = constraints.observables();
  const auto n_a = static_cast<Eigen::Index>(constraints.size());
  const Eigen::VectorXd targets =
      Eigen::Map<const Eigen::VectorXd>(constraints.targets().data(), n_a);

  check_box_feasibility(*space, obs, constraints.targets(), options.feasibility_margin);

  std::vector<double> y;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n_a);
  DualState state = evaluate(*space, obs, lambda, y);
  double dual = state.log_z;
  std::vector<double> trace{dual};
  std::vector<double> band{0.0};
  bool degenerate = false;

  auto residual_of = [&](const DualState& s) { return (targets - s.mean).lpNorm<Eigen::Infinity>(); };
  double residual = residual_of(state);

  // One damped Newton step; returns false when no acceptable step exists.
  auto advance = [&](bool polishing) -> bool {
    const Eigen::VectorXd grad = targets - state.mean;
    NewtonStep step = newton_step(state.cov, grad);
    if (step.floored) {
      degenerate = true;
      if (step.null_gradient > options.tolerance) {
        throw InfeasibleError(kModule,
                              "infeasible target: constraints are inconsistent on the span of "
                              "linearly dependent observables",
                              -1);
      }
    }
    const double slope = grad.dot(step.direction);
    if (!(slope < 0.0)) return false;

    double t = 1.0;
    for (int h = 0; h < kMaxHalvings; ++h, t *= options.damping) {
      const Eigen::VectorXd trial = lambda + t * step.direction;
      if (trial == lambda) return false;
      const double g = dual_value(*space, obs, trial, targets, y);
      const bool armijo = g <= dual + kArmijo * t * slope;
      // log Z and lambda . A can both be large while g is small, so near the
      // optimum the decrease drops below their rounding. Inside that band a
      // step is accepted when it shrinks the residual instead.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::abs(g) + 2.0 * std::abs(trial.dot(targets)));
      if (!armijo && g > dual + noise) continue;
      DualState next = evaluate(*space, obs, trial, y);
      const double next_residual = residual_of(next);
      if ((!armijo || polishing) && next_residual >= residual) continue;
      lambda = trial;
      state = std::move(next);
      dual = g;
      residual = next_residual;
      trace.push_back(g);
      band.push_back(armijo ? 0.0 : noise);
      return true;
    }
    return false;
  };

  int iterations = 0;
  while (residual > options.tolerance) {
    if (iterations >= options.max_iterations) {
      std::ostringstream os;
      os << "no convergence after " << iterations << " iterations (residual " << residual << ")";
      throw NonConvergenceError(kModule, os.str(), residual);
    }
    ++iterations;
    const bool moved = advance(false);
    if (lambda.lpNorm<Eigen::Infinity>() > kDivergenceBound && residual > options.tolerance) {
      throw InfeasibleError(kModule,
                            "infeasible target: multipliers diverge (|lambda| > 1e3) without "
                            "satisfying the constraints",
                            -1);
    }
    if (!moved && residual > options.tolerance) {
      std::ostringstream os;
      os << "line search failed after " << iterations << " iterations (residual " << residual << ")";
      throw NonConvergenceError(kModule, os.str(), residual);
    }
  }
  for (int p = 0; p < kPolishSteps && residual > 0.0; ++p) {
    if (!advance(true)) break;
  }

  MaxEntSolution sol{
      .lambda = lambda,
      .log_partition = state.log_z,
      .distribution = to_distribution(space, state.cell_prob),
      .entropy = state.log_z + lambda.dot(targets),
      .covariance = state.cov,
      .residual = residual,
      .iterations = iterations,
      .degenerate = degenerate,
      .dual_trace = std::move(trace),
      .dual_band = std::move(band),
      .warnings = {},
  };
  if (degenerate) {
    sol.warnings.emplace_back(
        "maxent-solver: observables are linearly dependent on the support of m; multipliers are "
        "not unique (pseudo-inverse Newton steps)");
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Primal oracle

Distribution brute_force_maxent(const SpacePtr& space, std::span<const Observable> observables,
                                std::span<const double> targets) {
  constexpr std::size_t kMaxPoints = 64;
  constexpr int kMaxIterations = 200;
  if (space->size() > kMaxPoints) {
    throw Error(ErrorKind::kUsage, kModule, "brute_force_maxent: at most 64 points supported");
  }
  if (observables.size() != targets.size()) {
    throw Error(ErrorKind::kUsage, kModule, "brute_force_maxent: one target per observable required");
  }
  for (const auto& a : observables) {
    if (!a.space().same_as(*space)) {
      throw Error(ErrorKind::kUsage, kModule, "brute_force_maxent: observable on a different space");
    }
  }
  check_box_feasibility(*space, observables, targets, SolverOptions{}.feasibility_margin);

  std::vector<std::size_t> support;
  for (std::size_t k = 0; k < space->size(); ++k) {
    if (space->in_support(k)) support.push_back(k);
  }
  const auto n = static_cast<Eigen::Index>(support.size());
  const auto rows = static_cast<Eigen::Index>(1 + observables.size());
  const auto dx = space->cell_volumes();
  const auto log_m = space->log_measure();

  Eigen::MatrixXd M(rows, n);
  Eigen::VectorXd b(rows);
  Eigen::VectorXd w(n), lm(n), p(n);
  b(0) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t k = support[static_cast<std::size_t>(i)];
    w(i) = dx[k];
    lm(i) = log_m[k];
    M(0, i) = dx[k];
    for (std::size_t a = 0; a < observables.size(); ++a) M(static_cast<Eigen::Index>(a + 1), i) = dx[k] * observables[a].values()[k];
  }
  for (std::size_t a = 0; a < targets.size(); ++a) b(static_cast<Eigen::Index>(a + 1)) = targets[a];

  // Start from the normalized measure, which is strictly positive on the support.
  const double log_total = space->log_total_mass();
  for (Eigen::Index i = 0; i < n; ++i) p(i) = std::exp(lm(i) - log_total);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(rows);

  auto residual = [&](const Eigen::VectorXd& pp, const Eigen::VectorXd& vv) {
    Eigen::VectorXd r(n + rows);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = w(i) * (std::log(pp(i)) - lm(i) + 1.0);
    r.head(n) += M.transpose() * vv;
    r.tail(rows) = M * pp - b;
    return r;
  };

  Eigen::VectorXd r = residual(p, nu);
  for (int it = 0; it < kMaxIterations && r.norm() > 1e-13; ++it) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + rows, n + rows);
    for (Eigen::Index i = 0; i < n; ++i) K(i, i) = w(i) / p(i);
    K.topRightCorner(n, rows) = M.transpose();
    K.bottomLeftCorner(rows, n) = M;
    Eigen::VectorXd rhs(n + rows);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i) = -w(i) * (std::log(p(i)) - lm(i) + 1.0);
    rhs.tail(rows) = -(M * p - b);
    const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
    const Eigen::VectorXd dp = sol.head(n);
    const Eigen::VectorXd dnu = sol.tail(rows) - nu;

    double t = 1.0;
    while (t > 1e-14 && ((p + t * dp).array() <= 0.0).any()) t *= 0.5;
    const double r0 = r.norm();
    Eigen::VectorXd rt = residual(p + t * dp, nu + t * dnu);
    while (t > 1e-14 && rt.norm() > (1.0 - 0.01 * t) * r0) {
      t *= 0.5;
      rt = residual(p + t * dp, nu + t * dnu);
    }
    if (t <= 1e-14) break;
    p += t * dp;
    nu += t * dnu;
    r = rt;
  }

  const double primal = (M * p - b).lpNorm<Eigen::Infinity>();
  if (primal > 1e-9) {
    throw InfeasibleError(kModule, "brute_force_maxent: no strictly positive distribution meets the constraints", -1);
  }
  if (r.norm() > 1e-9) {
    throw NonConvergenceError(kModule, "brute_force_maxent: KKT residual did not converge", r.norm());
  }
  std::vector<double> density(space->size(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) density[support[static_cast<std::size_t>(i)]] = p(i);
  return Distribution(space, std::move(density));
}

}  // namespace hyperme
