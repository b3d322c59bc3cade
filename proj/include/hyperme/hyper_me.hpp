#pragma once

// Distributions over parameter space: pi(theta) = e^{alpha S(theta)} g^{1/2}(theta) / zeta.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperme/info_geometry.hpp"

namespace hyperme {

struct EntropyProfile {
  ParameterGrid grid;
  std::vector<double> entropy;
  /// lambda per node for exponential families; empty otherwise.
  std::vector<Eigen::VectorXd> multipliers;
};

/// Profile and metric from one pass over the grid (exponential families
/// solve once per node for both).
struct FamilyTable {
  EntropyProfile profile;
  MetricField metric;
};

FamilyTable tabulate(const ModelFamily& family, MetricMethod method = MetricMethod::kAuto);
EntropyProfile entropy_profile(const ModelFamily& family);

struct HyperDistribution {
  ParameterGrid grid;
  MetricField metric;
  /// Total density: cell mass = pi * weight, g^{1/2} included.
  std::vector<double> pi;
  /// Log of the scalar density before normalization: alpha S, or S - lambda0 . A.
  std::vector<double> exponent;
  double log_zeta = 0.0;
  double alpha = 1.0;

  double sqrt_det(std::size_t k) const { return std::sqrt(metric.det[k]); }
  /// e^{exponent}; pi = scalar * g^{1/2} / zeta.
  double scalar_density(std::size_t k) const { return std::exp(exponent[k]); }
};

/// pi_k proportional to exp(exponent_k) * sqrt(det g_k), trapezoid-normalized in
/// log space. exponent = -inf marks an excluded node.
HyperDistribution make_hyper(const MetricField& metric, std::vector<double> exponent, double alpha);

HyperDistribution extended_me_posterior(const EntropyProfile& profile, const MetricField& metric);
HyperDistribution entropic_prior(const EntropyProfile& profile, const MetricField& metric, double alpha);

/// sigma[pi] = -sum pi w log(pi / g^{1/2}) + sum pi w S. A single-node grid
/// reports S(theta_0).
double sigma_entropy(const HyperDistribution& hyper, const EntropyProfile& profile);

struct AlphaReport {
  std::vector<double> alphas;
  std::vector<double> sigma;
  double sigma_at_one = 0.0;
  /// sigma(1) - sigma(alpha) per tested alpha.
  std::vector<double> margins;
  /// Every margin within rounding of zero (flat S).
  bool tie = false;
  bool alpha_one_is_max = false;
};

AlphaReport alpha_optimality_check(const EntropyProfile& profile, const MetricField& metric,
                                   std::span<const double> alphas);

/// Density of n independent draws on spaces::product(base.space(), n).
Distribution product_distribution(const Distribution& base, const SpacePtr& product_space, int n);

ModelFamily product_family(const ModelFamily& family, int n);

struct RepeatReport {
  int n = 1;
  FamilyTable base;
  FamilyTable product;
  /// max_k |S^(n) - n S^(1)|.
  double entropy_deviation = 0.0;
  /// max_k ||g^(n) - n g^(1)||_max / ||n g^(1)||_max.
  double metric_deviation = 0.0;
  /// pi^(n) proportional to e^{S^(n)} (g^(n))^{1/2}.
  HyperDistribution naive_prior;
};

RepeatReport repeat_family(const ModelFamily& family, int n);

struct ConsistencyReport {
  int n = 1;
  HyperDistribution prior;
  /// max over nodes and x_1 of the relative gap between
  /// sum_{x_2..x_n} pi p(x_1..x_n|theta) and pi p(x_1|theta).
  double max_relative_deviation = 0.0;
};

ConsistencyReport consistency_constrained_prior(const ModelFamily& family, int n);

/// Observations are sample-space coordinates; each must match a grid point.
HyperDistribution bayes_update(const HyperDistribution& prior, const ModelFamily& family,
                               std::span<const double> observations);

/// The same hyperdistribution in coordinates phi(theta): pulled-back metric,
/// unchanged scalar density at the image nodes, renormalized on the image grid.
HyperDistribution reparametrize(const HyperDistribution& hyper, const Reparametrization& phi);

// Quadrature helpers.

/// Trapezoid mass of a 1-d hyperdistribution between nodes i <= j.
double interval_probability(const HyperDistribution& hyper, std::size_t i, std::size_t j);

struct HyperMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
HyperMoments moments(const HyperDistribution& hyper);

/// Flat index of the largest scalar density (first one on ties).
std::size_t argmax_scalar(const HyperDistribution& hyper);

/// Marginal density along one axis (other axes summed with their weights).
std::vector<double> marginal(const HyperDistribution& hyper, std::size_t axis);

/// (1/2) sum_k |p_k - q_k| w_k over a shared grid.
double total_variation(std::span<const double> p, std::span<const double> q, const ParameterGrid& grid);

}  // namespace hyperme
