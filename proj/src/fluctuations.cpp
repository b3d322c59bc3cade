#include "hyperme/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperme/error.hpp"
#include "hyperme/parallel.hpp"

namespace hyperme {
namespace {

constexpr const char* kModule = "fluctuations";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd node_vector(const ParameterGrid& grid, std::size_t k) {
  const auto theta = grid.coords(k);
  return Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
}

void check_lambda0(std::span<const double> lambda0, std::size_t dim) {
  if (lambda0.size() != dim) throw Error(ErrorKind::kUsage, kModule, "lambda0 needs one entry per observable");
  for (double l : lambda0) {
    if (!std::isfinite(l)) throw Error(ErrorKind::kUsage, kModule, "lambda0 must be finite");
  }
}

Eigen::MatrixXd inverse(const Eigen::MatrixXd& c) {
  return c.ldlt().solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
}

double max_rel_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max(b.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

// Neighbour of `flat` one step along `axis`, if it exists.
std::optional<std::size_t> neighbour(const ParameterGrid& grid, std::size_t flat, std::size_t axis, int dir) {
  auto idx = grid.multi_index(flat);
  if (dir < 0 && idx[axis] == 0) return std::nullopt;
  if (dir > 0 && idx[axis] + 1 >= grid.axis(axis).size()) return std::nullopt;
  idx[axis] = dir < 0 ? idx[axis] - 1 : idx[axis] + 1;
  return grid.flat_index(idx);
}

// Componentwise hull bounds of observables on the support of their space.
std::vector<std::pair<double, double>> hull_bounds(const SampleSpace& space, std::span<const Observable> obs) {
  std::vector<std::pair<double, double>> out;
  for (const auto& a : obs) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < space.size(); ++k) {
      if (!space.in_support(k)) continue;
      lo = std::min(lo, a.values()[k]);
      hi = std::max(hi, a.values()[k]);
    }
    out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace

FluctuationProfile tabulate_fluctuations(const FluctuationScenario& scenario) {
  check_lambda0(scenario.lambda0, scenario.observables.size());
  const ParameterGrid& grid = scenario.a_grid;
  if (grid.size() == 0) throw Error(ErrorKind::kDegenerate, kModule, "empty A grid");
  const ModelFamily family = ModelFamily::by_target(scenario.space, scenario.observables, grid, 1.0, scenario.solver);
  const std::size_t n = grid.size();
  FluctuationProfile out{EntropyProfile{grid, std::vector<double>(n), std::vector<Eigen::VectorXd>(n)},
                         MetricField{grid, std::vector<Eigen::MatrixXd>(n), std::vector<double>(n),
                                     scenario.metric == FluctuationMetric::kEntropyHessian
                                         ? MetricMethod::kFiniteDifference
                                         : MetricMethod::kAnalytic},
                         0.0};
  std::vector<double> gap(n, 0.0);
  parallel_for(n, [&](std::size_t k) {
    const auto theta = grid.coords(k);
    const MaxEntSolution sol = family.solve(theta);
    out.profile.entropy[k] = sol.entropy;
    out.profile.multipliers[k] = sol.lambda;
    const Eigen::MatrixXd cinv = metric_from_solution(family, sol);
    if (scenario.metric == FluctuationMetric::kEntropyHessian) {
      out.metric.g[k] = hessian_entropy(family, theta);
      gap[k] = max_rel_gap(out.metric.g[k], cinv);
    } else {
      out.metric.g[k] = cinv;
    }
    out.metric.det[k] = metric_determinant(out.metric.g[k]);
  });
  out.hessian_deviation = *std::max_element(gap.begin(), gap.end());
  return out;
}

FluctuationProfile synthetic_profile(const ParameterGrid& grid,
                                     const std::function<double(std::span<const double>)>& entropy,
                                     const std::function<Eigen::VectorXd(std::span<const double>)>& lambda,
                                     const std::function<Eigen::MatrixXd(std::span<const double>)>& metric) {
  const std::size_t n = grid.size();
  FluctuationProfile out{EntropyProfile{grid, std::vector<double>(n), std::vector<Eigen::VectorXd>(n)},
                         MetricField{grid, std::vector<Eigen::MatrixXd>(n), std::vector<double>(n),
                                     MetricMethod::kAnalytic},
                         0.0};
  for (std::size_t k = 0; k < n; ++k) {
    const auto theta = grid.coords(k);
    out.profile.entropy[k] = entropy(theta);
    out.profile.multipliers[k] = lambda(theta);
    out.metric.g[k] = metric(theta);
    out.metric.det[k] = metric_determinant(out.metric.g[k]);
  }
  return out;
}

HyperDistribution fluctuation_distribution(const FluctuationProfile& profile, std::span<const double> lambda0) {
  const ParameterGrid& grid = profile.profile.grid;
  check_lambda0(lambda0, grid.dim());
  const Eigen::Map<const Eigen::VectorXd> l0(lambda0.data(), static_cast<Eigen::Index>(lambda0.size()));
  std::vector<double> exponent(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    exponent[k] = profile.profile.entropy[k] - l0.dot(node_vector(grid, k));
  }
  return make_hyper(profile.metric, std::move(exponent), 1.0);
}

FluctuationMoments fluctuation_moments(const HyperDistribution& pi_A, const FluctuationProfile& profile) {
  const ParameterGrid& grid = pi_A.grid;
  const auto d = static_cast<Eigen::Index>(grid.dim());
  FluctuationMoments m{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d),
                       Eigen::MatrixXd::Zero(d, d)};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mass = pi_A.pi[k] * grid.weight(k);
    m.mean_A += mass * node_vector(grid, k);
    m.mean_lambda += mass * profile.profile.multipliers[k];
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mass = pi_A.pi[k] * grid.weight(k);
    const Eigen::VectorXd da = node_vector(grid, k) - m.mean_A;
    const Eigen::VectorXd dl = profile.profile.multipliers[k] - m.mean_lambda;
    m.cov_A += mass * da * da.transpose();
    m.cov_lambda += mass * dl * dl.transpose();
  }
  return m;
}

FluctuationPeak fluctuation_peak(const HyperDistribution& pi_A, const FluctuationProfile& profile) {
  const ParameterGrid& grid = pi_A.grid;
  FluctuationPeak p;
  p.node = argmax_scalar(pi_A);
  p.A0 = node_vector(grid, p.node);
  p.lambda_at_node = profile.profile.multipliers[p.node];
  for (std::size_t i = 0; i < grid.dim(); ++i) {
    const auto lo = neighbour(grid, p.node, i, -1);
    const auto hi = neighbour(grid, p.node, i, +1);
    for (const auto& nb : {lo, hi}) {
      if (nb) {
        p.lambda_cell_bound = std::max(
            p.lambda_cell_bound,
            (profile.profile.multipliers[*nb] - p.lambda_at_node).lpNorm<Eigen::Infinity>());
      }
    }
    if (!lo || !hi) continue;
    const auto x = grid.axis(i).nodes();
    const std::size_t c = grid.multi_index(p.node)[i];
    const double x0 = x[c - 1], x1 = x[c], x2 = x[c + 1];
    const double y0 = pi_A.exponent[*lo], y1 = pi_A.exponent[p.node], y2 = pi_A.exponent[*hi];
    const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if (den != 0.0 && std::isfinite(num / den)) {
      const double v = x1 - 0.5 * num / den;
      if (v > x0 && v < x2) p.A0(static_cast<Eigen::Index>(i)) = v;
    }
  }
  return p;
}

CorrelationReport lambda_A_correlation(const FluctuationProfile& profile, std::span<const double> lambda0) {
  const ParameterGrid& grid = profile.profile.grid;
  const auto d = static_cast<Eigen::Index>(grid.dim());
  const HyperDistribution pi = fluctuation_distribution(profile, lambda0);
  const FluctuationMoments m = fluctuation_moments(pi, profile);
  const FluctuationPeak peak = fluctuation_peak(pi, profile);

  CorrelationReport r;
  r.direct = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mass = pi.pi[k] * grid.weight(k);
    r.direct += mass * (profile.profile.multipliers[k] - m.mean_lambda) * (node_vector(grid, k) - m.mean_A).transpose();
  }

  const Eigen::Map<const Eigen::VectorXd> l0(lambda0.data(), d);
  r.formula = (l0 - m.mean_lambda) * (peak.A0 - m.mean_A).transpose();
  std::vector<double> shifted(lambda0.begin(), lambda0.end());
  for (Eigen::Index b = 0; b < d; ++b) {
    const double h = 1e-4 * std::abs(l0(b)) + 1e-6;
    r.steps.push_back(h);
    shifted[b] = l0(b) + h;
    const Eigen::VectorXd up = fluctuation_moments(fluctuation_distribution(profile, shifted), profile).mean_lambda;
    shifted[b] = l0(b) - h;
    const Eigen::VectorXd down = fluctuation_moments(fluctuation_distribution(profile, shifted), profile).mean_lambda;
    shifted[b] = l0(b);
    r.formula.col(b) -= (up - down) / (2.0 * h);
  }
  r.agreement = (r.direct - r.formula).cwiseAbs().maxCoeff();
  r.canonical_deviation = (r.direct + Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  return r;
}

GaussianComparison gaussian_comparison(const HyperDistribution& pi_A, const FluctuationProfile& profile) {
  const ParameterGrid& grid = pi_A.grid;
  const FluctuationPeak peak = fluctuation_peak(pi_A, profile);
  const Eigen::MatrixXd& g0 = profile.metric.g[peak.node];

  std::vector<double> log_q(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd dA = node_vector(grid, k) - peak.A0;
    log_q[k] = -0.5 * dA.dot(g0 * dA);
  }
  const double top = *std::max_element(log_q.begin(), log_q.end());
  std::vector<double> q(grid.size());
  double mass = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    q[k] = std::exp(log_q[k] - top);
    mass += q[k] * grid.weight(k);
  }
  for (double& v : q) v /= mass;

  GaussianComparison out;
  out.total_variation = total_variation(pi_A.pi, q, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    bool is_max = pi_A.pi[k] > 0.0;
    for (std::size_t i = 0; i < grid.dim() && is_max; ++i) {
      for (int dir : {-1, 1}) {
        const auto nb = neighbour(grid, k, i, dir);
        if (nb && pi_A.pi[*nb] >= pi_A.pi[k]) is_max = false;
      }
    }
    if (is_max) ++out.local_maxima;
  }
  if (out.local_maxima > 1) {
    out.warnings.push_back("fluctuations: pi(A) has " + std::to_string(out.local_maxima) +
                           " local maxima; the Gaussian comparison assumes a single peak");
  }
  return out;
}

Eigen::VectorXd equilibrium_multiplier(const FluctuationScenario& scenario) {
  if (!scenario.bath) throw Error(ErrorKind::kUsage, kModule, "equilibrium_multiplier needs a bath");
  const BathSpec& bath = *scenario.bath;
  const auto d = static_cast<Eigen::Index>(scenario.observables.size());
  if (bath.observables.size() != scenario.observables.size() || bath.total.size() != scenario.observables.size()) {
    throw Error(ErrorKind::kUsage, kModule, "bath needs one observable and one total per system observable");
  }
  const auto hs = hull_bounds(*scenario.space, scenario.observables);
  const auto hb = hull_bounds(*bath.space, bath.observables);
  for (Eigen::Index a = 0; a < d; ++a) {
    const double lo = hs[a].first + hb[a].first, hi = hs[a].second + hb[a].second;
    if (!(bath.total[a] > lo && bath.total[a] < hi)) {
      throw InfeasibleError(kModule, "bath total A_T is outside the joint feasible range", static_cast<int>(a));
    }
  }

  const Eigen::Map<const Eigen::VectorXd> total(bath.total.data(), d);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(d);
  auto state = [&](const Eigen::VectorXd& l, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    const std::span<const double> ls(l.data(), static_cast<std::size_t>(l.size()));
    const MaxEntSolution s = canonical_at(scenario.space, scenario.observables, ls);
    const MaxEntSolution b = canonical_at(bath.space, bath.observables, ls);
    mean.resize(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      mean(a) = expectation(s.distribution, scenario.observables[a]) + expectation(b.distribution, bath.observables[a]);
    }
    cov = s.covariance + b.covariance;
    return s.log_partition + b.log_partition + l.dot(total);
  };
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double dual = state(lambda, mean, cov);
  const double tol = 1e-12 * std::max(1.0, total.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd grad = total - mean;
    if (grad.lpNorm<Eigen::Infinity>() <= tol) return lambda;
    const Eigen::VectorXd step = -cov.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd m2;
    Eigen::MatrixXd c2;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      const double trial = state(lambda + t * step, m2, c2);
      if (trial <= dual + 1e-4 * t * grad.dot(step) || (h == 0 && (total - m2).norm() < grad.norm())) {
        lambda += t * step;
        dual = trial;
        mean = m2;
        cov = c2;
        break;
      }
    }
  }
  const double residual = (total - mean).lpNorm<Eigen::Infinity>();
  if (residual <= 1e-9 * std::max(1.0, total.lpNorm<Eigen::Infinity>())) return lambda;
  throw NonConvergenceError(kModule, "joint system+bath multiplier did not converge", residual);
}

BathOracle finite_bath_oracle(const FluctuationScenario& scenario, const FluctuationProfile& profile) {
  if (!scenario.bath) throw Error(ErrorKind::kUsage, kModule, "finite_bath_oracle needs a bath");
  const BathSpec& bath = *scenario.bath;
  const ParameterGrid& grid = profile.profile.grid;
  const std::size_t d = grid.dim();
  if (bath.observables.size() != d || bath.total.size() != d) {
    throw Error(ErrorKind::kUsage, kModule, "bath needs one observable and one total per system observable");
  }
  const auto hb = hull_bounds(*bath.space, bath.observables);
  std::vector<Axis> bath_axes;
  for (std::size_t a = 0; a < d; ++a) {
    bath_axes.push_back(Axis::single(bath.observables[a].name(), 0.5 * (hb[a].first + hb[a].second),
                                     hb[a].second - hb[a].first));
  }
  const ParameterGrid bath_bounds(std::move(bath_axes));
  auto bath_entropy = [&](std::span<const double> a) {
    return solve_lagrange(ConstraintSet(bath.observables, std::vector<double>(a.begin(), a.end())), scenario.solver)
        .entropy;
  };

  MetricField joint{grid, profile.metric.g, profile.metric.det, profile.metric.method};
  std::vector<double> exponent(grid.size(), kNegInf);
  parallel_for(grid.size(), [&](std::size_t k) {
    const Eigen::VectorXd A = node_vector(grid, k);
    std::vector<double> rest(d);
    for (std::size_t a = 0; a < d; ++a) {
      rest[a] = bath.total[a] - A(static_cast<Eigen::Index>(a));
      const double margin = 1e-9 * std::max(1.0, hb[a].second - hb[a].first);
      if (!(rest[a] > hb[a].first + margin && rest[a] < hb[a].second - margin)) return;
    }
    std::optional<MaxEntSolution> sol;
    try {
      sol = solve_lagrange(ConstraintSet(bath.observables, rest), scenario.solver);
    } catch (const InfeasibleError&) {
      return;
    }
    const Eigen::MatrixXd gb = scenario.metric == FluctuationMetric::kEntropyHessian
                                   ? negative_hessian(bath_entropy, rest, bath_bounds)
                                   : inverse(sol->covariance);
    joint.g[k] = profile.metric.g[k] + gb;
    joint.det[k] = metric_determinant(joint.g[k]);
    exponent[k] = profile.profile.entropy[k] + sol->entropy;
  });

  BathOracle out{make_hyper(joint, std::move(exponent), 1.0), 0, {}};
  for (double e : out.pi_A.exponent) out.excluded += e == kNegInf ? 1 : 0;
  if (out.excluded * 10 > grid.size()) {
    std::ostringstream os;
    os << "fluctuations: " << out.excluded << " of " << grid.size()
       << " A nodes excluded because A_T - A leaves the bath hull";
    out.warnings.push_back(os.str());
  }
  return out;
}

FluctuationReport analyze(const FluctuationScenario& scenario, bool finite_bath) {
  FluctuationProfile profile = tabulate_fluctuations(scenario);
  HyperDistribution pi = fluctuation_distribution(profile, scenario.lambda0);
  FluctuationMoments mom = fluctuation_moments(pi, profile);
  FluctuationPeak peak = fluctuation_peak(pi, profile);
  CorrelationReport corr = lambda_A_correlation(profile, scenario.lambda0);
  GaussianComparison gauss = gaussian_comparison(pi, profile);
  FluctuationReport r{std::move(profile), std::move(pi), std::move(mom), std::move(peak), std::move(corr),
                      std::move(gauss), std::nullopt, std::nullopt, std::nullopt, {}};
  r.warnings = r.gaussian.warnings;
  if (finite_bath) {
    if (!scenario.bath) throw Error(ErrorKind::kUsage, kModule, "finite-bath analysis requested without a bath");
    BathOracle oracle = finite_bath_oracle(scenario, r.profile);
    const Eigen::VectorXd l_eq = equilibrium_multiplier(scenario);
    const HyperDistribution large = fluctuation_distribution(
        r.profile, std::span<const double>(l_eq.data(), static_cast<std::size_t>(l_eq.size())));
    r.bath_total_variation = total_variation(oracle.pi_A.pi, large.pi, r.profile.profile.grid);
    r.warnings.insert(r.warnings.end(), oracle.warnings.begin(), oracle.warnings.end());
    r.bath = std::move(oracle);
    r.bath_lambda0 = l_eq;
  }
  return r;
}

}  // namespace hyperme
