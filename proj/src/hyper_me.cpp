#include "hyperme/hyper_me.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "hyperme/error.hpp"
#include "hyperme/kernels.hpp"
#include "hyperme/parallel.hpp"

namespace hyperme {
namespace {

constexpr const char* kModule = "hyper-me";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string describe_node(const ParameterGrid& grid, std::size_t k) {
  std::ostringstream os;
  os.precision(10);
  os << "node " << k << " (";
  const auto theta = grid.coords(k);
  for (std::size_t i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << grid.axis(i).name() << "=" << theta[i];
  os << ")";
  return os.str();
}

void require_same_grid(const ParameterGrid& a, const ParameterGrid& b) {
  if (a.dim() != b.dim() || a.size() != b.size()) {
    throw Error(ErrorKind::kUsage, kModule, "profile and metric live on different grids");
  }
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const auto x = a.axis(i).nodes(), y = b.axis(i).nodes();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) {
      throw Error(ErrorKind::kUsage, kModule, "profile and metric live on different grids");
    }
  }
}

}  // namespace

FamilyTable tabulate(const ModelFamily& family, MetricMethod method) {
  const ParameterGrid& grid = family.grid();
  const std::size_t n = grid.size();
  FamilyTable t{EntropyProfile{grid, std::vector<double>(n), {}},
                MetricField{grid, std::vector<Eigen::MatrixXd>(n), std::vector<double>(n), method}};
  if (method == MetricMethod::kAuto) {
    method = family.exponential() ? MetricMethod::kAnalytic : MetricMethod::kFiniteDifference;
  }
  t.metric.method = method;
  if (family.exponential()) t.profile.multipliers.resize(n);

  parallel_for(n, [&](std::size_t k) {
    const auto theta = grid.coords(k);
    try {
      if (family.exponential()) {
        const MaxEntSolution sol = family.solve(theta);
        t.profile.entropy[k] = sol.entropy;
        t.profile.multipliers[k] = sol.lambda;
        t.metric.g[k] = method == MetricMethod::kAnalytic ? metric_from_solution(family, sol)
                                                          : fisher_metric(family, theta, method);
      } else {
        t.profile.entropy[k] = relative_entropy(family.evaluate(theta));
        t.metric.g[k] = fisher_metric(family, theta, method);
      }
      t.metric.det[k] = metric_determinant(t.metric.g[k]);
    } catch (const Error& e) {
      throw Error(e.kind(), kModule, describe_node(grid, k) + ": " + e.what());
    }
    if (!std::isfinite(t.profile.entropy[k])) {
      throw Error(ErrorKind::kDomain, kModule, describe_node(grid, k) + ": entropy is not finite");
    }
  });
  return t;
}

EntropyProfile entropy_profile(const ModelFamily& family) {
  const ParameterGrid& grid = family.grid();
  EntropyProfile profile{grid, std::vector<double>(grid.size()), {}};
  if (family.exponential()) profile.multipliers.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    try {
      if (family.exponential()) {
        const MaxEntSolution sol = family.solve(grid.coords(k));
        profile.entropy[k] = sol.entropy;
        profile.multipliers[k] = sol.lambda;
      } else {
        profile.entropy[k] = relative_entropy(family.evaluate_node(k));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), kModule, describe_node(grid, k) + ": " + e.what());
    }
  });
  return profile;
}

HyperDistribution make_hyper(const MetricField& metric, std::vector<double> exponent, double alpha) {
  const ParameterGrid& grid = metric.grid;
  const std::size_t n = grid.size();
  if (exponent.size() != n) throw Error(ErrorKind::kUsage, kModule, "exponent/grid size mismatch");
  std::vector<double> log_mass(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (std::isnan(exponent[k]) || exponent[k] == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::kDomain, kModule, describe_node(grid, k) + ": non-finite log scalar density");
    }
    const double det = metric.det[k];
    log_mass[k] = (det > 0.0 && exponent[k] != kNegInf)
                      ? exponent[k] + 0.5 * std::log(det) + std::log(grid.weight(k))
                      : kNegInf;
  }
  const double log_zeta = kernels::log_sum_exp(log_mass);
  if (!std::isfinite(log_zeta)) {
    throw Error(ErrorKind::kDegenerate, kModule, "hyperdistribution integrand vanishes on the whole grid");
  }
  HyperDistribution h{grid, metric, std::vector<double>(n), std::move(exponent), log_zeta, alpha};
  for (std::size_t k = 0; k < n; ++k) {
    h.pi[k] = log_mass[k] == kNegInf ? 0.0 : std::exp(log_mass[k] - log_zeta) / grid.weight(k);
  }
  return h;
}

HyperDistribution entropic_prior(const EntropyProfile& profile, const MetricField& metric, double alpha) {
  require_same_grid(profile.grid, metric.grid);
  if (!std::isfinite(alpha)) throw Error(ErrorKind::kUsage, kModule, "alpha must be finite");
  std::vector<double> exponent(profile.entropy.size());
  for (std::size_t k = 0; k < exponent.size(); ++k) exponent[k] = alpha * profile.entropy[k];
  return make_hyper(metric, std::move(exponent), alpha);
}

HyperDistribution extended_me_posterior(const EntropyProfile& profile, const MetricField& metric) {
  return entropic_prior(profile, metric, 1.0);
}

double sigma_entropy(const HyperDistribution& hyper, const EntropyProfile& profile) {
  require_same_grid(hyper.grid, profile.grid);
  const ParameterGrid& grid = hyper.grid;
  if (grid.size() == 1) return profile.entropy[0];
  double sigma = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (hyper.pi[k] == 0.0) continue;
    const double root = hyper.sqrt_det(k);
    if (!(root > 0.0)) {
      throw Error(ErrorKind::kDomain, kModule, describe_node(grid, k) + ": pi > 0 where g^{1/2} = 0");
    }
    const double mass = hyper.pi[k] * grid.weight(k);
    sigma += mass * (profile.entropy[k] - std::log(hyper.pi[k] / root));
  }
  return sigma;
}

AlphaReport alpha_optimality_check(const EntropyProfile& profile, const MetricField& metric,
                                   std::span<const double> alphas) {
  AlphaReport r;
  r.alphas.assign(alphas.begin(), alphas.end());
  r.sigma_at_one = sigma_entropy(entropic_prior(profile, metric, 1.0), profile);
  const double tol = 1e-12 * std::max(1.0, std::abs(r.sigma_at_one));
  r.tie = true;
  r.alpha_one_is_max = true;
  bool compared = false;
  for (double a : alphas) {
    compared = compared || a != 1.0;
    const double s = a == 1.0 ? r.sigma_at_one : sigma_entropy(entropic_prior(profile, metric, a), profile);
    r.sigma.push_back(s);
    r.margins.push_back(r.sigma_at_one - s);
    if (std::abs(r.margins.back()) > tol) r.tie = false;
    if (r.margins.back() < -tol) r.alpha_one_is_max = false;
  }
  r.tie = r.tie && compared;
  return r;
}

// ---------------------------------------------------------------------------
// Repeated experiments

Distribution product_distribution(const Distribution& base, const SpacePtr& product_space, int n) {
  const std::size_t m = base.size();
  std::vector<double> density(product_space->size(), 1.0);
  for (std::size_t flat = 0; flat < density.size(); ++flat) {
    std::size_t rest = flat;
    for (int i = 0; i < n; ++i) {
      density[flat] *= base[rest % m];
      rest /= m;
    }
  }
  return Distribution(product_space, std::move(density));
}

ModelFamily product_family(const ModelFamily& family, int n) {
  if (n < 1) throw Error(ErrorKind::kUsage, kModule, "repetitions n must be >= 1");
  if (n == 1) return family;
  SpacePtr product = spaces::product(*family.space_ptr(), n);
  switch (family.kind()) {
    case FamilyKind::kByTarget:
    case FamilyKind::kByMultiplier: {
      std::vector<Observable> summed;
      for (const auto& a : family.observables()) summed.push_back(observables::product_sum(a, product, n));
      if (family.kind() == FamilyKind::kByMultiplier) {
        return ModelFamily::by_multiplier(product, std::move(summed), family.grid());
      }
      return ModelFamily::by_target(product, std::move(summed), family.grid(),
                                    family.target_scale() * n, family.solver_options());
    }
    case FamilyKind::kExplicit:
      break;
  }
  return ModelFamily::explicit_family(
      product, family.grid(),
      [family, product, n](std::span<const double> theta) {
        return product_distribution(family.evaluate(theta), product, n);
      },
      family.name() + "^" + std::to_string(n));
}

RepeatReport repeat_family(const ModelFamily& family, int n) {
  FamilyTable base = tabulate(family);
  FamilyTable product = tabulate(product_family(family, n));
  HyperDistribution naive = extended_me_posterior(product.profile, product.metric);
  RepeatReport r{n, std::move(base), std::move(product), 0.0, 0.0, std::move(naive)};
  for (std::size_t k = 0; k < family.grid().size(); ++k) {
    r.entropy_deviation = std::max(r.entropy_deviation,
                                   std::abs(r.product.profile.entropy[k] - n * r.base.profile.entropy[k]));
    const Eigen::MatrixXd scaled = static_cast<double>(n) * r.base.metric.g[k];
    const double denom = std::max(scaled.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    r.metric_deviation = std::max(r.metric_deviation, (r.product.metric.g[k] - scaled).cwiseAbs().maxCoeff() / denom);
  }
  return r;
}

ConsistencyReport consistency_constrained_prior(const ModelFamily& family, int n) {
  const FamilyTable base = tabulate(family);
  ConsistencyReport r{n, extended_me_posterior(base.profile, base.metric), 0.0};
  if (n == 1) return r;

  // Candidate pi^(n) = pi^(1); marginalize the literal n-fold model over
  // x_2..x_n and compare with pi^(1) p(x_1|theta).
  const ModelFamily product = product_family(family, n);
  const auto& space = *family.space_ptr();
  const std::size_t m = space.size();
  const auto dx = space.cell_volumes();
  const auto pdx = product.space_ptr()->cell_volumes();
  const ParameterGrid& grid = family.grid();
  std::vector<double> worst(grid.size(), 0.0);
  parallel_for(grid.size(), [&](std::size_t k) {
    const Distribution p1 = family.evaluate_node(k);
    const Distribution pn = product.evaluate_node(k);
    std::vector<double> marg(m, 0.0);
    for (std::size_t flat = 0; flat < pn.size(); ++flat) {
      const std::size_t x1 = flat % m;
      marg[x1] += pn[flat] * pdx[flat] / dx[x1];
    }
    const double pi = r.prior.pi[k];
    for (std::size_t x = 0; x < m; ++x) {
      const double rhs = pi * p1[x];
      const double lhs = pi * marg[x];
      if (rhs == 0.0) {
        if (lhs != 0.0) worst[k] = std::numeric_limits<double>::infinity();
        continue;
      }
      worst[k] = std::max(worst[k], std::abs(lhs - rhs) / rhs);
    }
  });
  r.max_relative_deviation = *std::max_element(worst.begin(), worst.end());
  return r;
}

HyperDistribution bayes_update(const HyperDistribution& prior, const ModelFamily& family,
                               std::span<const double> observations) {
  if (observations.empty()) return prior;
  require_same_grid(prior.grid, family.grid());
  const auto points = family.space_ptr()->points();
  std::map<std::size_t, double> counts;
  for (double obs : observations) {
    std::size_t best = points.size();
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (std::abs(points[k] - obs) <= 1e-12 * std::max(1.0, std::abs(obs))) {
        best = k;
        break;
      }
    }
    if (best == points.size()) {
      std::ostringstream os;
      os << "observation " << obs << " does not match any sample-space point";
      throw Error(ErrorKind::kUsage, kModule, os.str());
    }
    counts[best] += 1.0;
  }

  const ParameterGrid& grid = prior.grid;
  std::vector<double> exponent(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    if (prior.pi[k] == 0.0) {
      exponent[k] = kNegInf;
      return;
    }
    const Distribution p = family.evaluate_node(k);
    double loglik = 0.0;
    for (const auto& [idx, c] : counts) loglik += p[idx] > 0.0 ? c * std::log(p[idx]) : kNegInf;
    exponent[k] = prior.exponent[k] + loglik;
  });
  try {
    HyperDistribution post = make_hyper(prior.metric, std::move(exponent), prior.alpha);
    return post;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegenerate) {
      throw Error(ErrorKind::kDegenerate, kModule, "observations are impossible under every grid node");
    }
    throw;
  }
}

HyperDistribution reparametrize(const HyperDistribution& hyper, const Reparametrization& phi) {
  MetricField image = pullback_metric(hyper.metric, phi);
  const ParameterGrid& grid = hyper.grid;
  std::vector<char> reversed(grid.dim(), 0);
  for (std::size_t i = 0; i < grid.dim(); ++i) {
    const Axis& a = grid.axis(i);
    reversed[i] = a.size() > 1 && phi.forward(i, a.nodes().back()) < phi.forward(i, a.nodes().front());
  }
  std::vector<double> exponent(grid.size());
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    auto idx = image.grid.multi_index(flat);
    for (std::size_t i = 0; i < grid.dim(); ++i) {
      if (reversed[i]) idx[i] = grid.axis(i).size() - 1 - idx[i];
    }
    exponent[flat] = hyper.exponent[grid.flat_index(idx)];
  }
  return make_hyper(image, std::move(exponent), hyper.alpha);
}

// ---------------------------------------------------------------------------
// Quadrature helpers

double interval_probability(const HyperDistribution& hyper, std::size_t i, std::size_t j) {
  if (hyper.grid.dim() != 1) throw Error(ErrorKind::kUsage, kModule, "interval_probability needs a 1-d grid");
  if (i > j || j >= hyper.grid.size()) throw Error(ErrorKind::kUsage, kModule, "interval node indices out of range");
  const auto x = hyper.grid.axis(0).nodes();
  double mass = 0.0;
  for (std::size_t k = i; k < j; ++k) mass += 0.5 * (hyper.pi[k] + hyper.pi[k + 1]) * (x[k + 1] - x[k]);
  return mass;
}

HyperMoments moments(const HyperDistribution& hyper) {
  const ParameterGrid& grid = hyper.grid;
  const auto d = static_cast<Eigen::Index>(grid.dim());
  HyperMoments m{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto theta = grid.coords(k);
    m.mean += hyper.pi[k] * grid.weight(k) * Eigen::Map<const Eigen::VectorXd>(theta.data(), d);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto theta = grid.coords(k);
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(theta.data(), d) - m.mean;
    m.covariance += hyper.pi[k] * grid.weight(k) * c * c.transpose();
  }
  return m;
}

std::size_t argmax_scalar(const HyperDistribution& hyper) {
  return static_cast<std::size_t>(std::max_element(hyper.exponent.begin(), hyper.exponent.end()) -
                                  hyper.exponent.begin());
}

std::vector<double> marginal(const HyperDistribution& hyper, std::size_t axis) {
  const ParameterGrid& grid = hyper.grid;
  if (axis >= grid.dim()) throw Error(ErrorKind::kUsage, kModule, "marginal: axis out of range");
  const Axis& a = grid.axis(axis);
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::size_t i = grid.multi_index(k)[axis];
    out[i] += hyper.pi[k] * grid.weight(k) / a.weights()[i];
  }
  return out;
}

double total_variation(std::span<const double> p, std::span<const double> q, const ParameterGrid& grid) {
  if (p.size() != grid.size() || q.size() != grid.size()) {
    throw Error(ErrorKind::kUsage, kModule, "total_variation: size mismatch");
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) tv += std::abs(p[k] - q[k]) * grid.weight(k);
  return 0.5 * tv;
}

}  // namespace hyperme
