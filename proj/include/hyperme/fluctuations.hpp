#pragma once

// Fluctuations of constraint values under a bath at fixed multiplier lambda0:
//   pi(A) = e^{S(A) - lambda0 . A} g^{1/2}(A) / zeta(lambda0),
// with zeta(lambda0) the grid normalizer.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hyperme/hyper_me.hpp"

namespace hyperme {

enum class FluctuationMetric {
  kEntropyHessian,     // g = -d^2 S / dA dA by central second differences
  kInverseCovariance,  // g = C^-1 from the node solve
};

/// Finite bath for the enumeration oracle; A_T is the conserved total.
struct BathSpec {
  SpacePtr space;
  std::vector<Observable> observables;
  std::vector<double> total;
};

struct FluctuationScenario {
  SpacePtr space;
  std::vector<Observable> observables;
  std::vector<double> lambda0;
  ParameterGrid a_grid;
  FluctuationMetric metric = FluctuationMetric::kEntropyHessian;
  std::optional<BathSpec> bath;
  SolverOptions solver;
};

/// S(A), lambda(A) and g(A) on the A grid. Solved once; every later quantity
/// reuses these multipliers.
struct FluctuationProfile {
  EntropyProfile profile;
  MetricField metric;
  /// max over nodes of ||g - C^-1||_max / ||C^-1||_max (zero for synthetic profiles).
  double hessian_deviation = 0.0;
};

FluctuationProfile tabulate_fluctuations(const FluctuationScenario& scenario);

/// Profile from closed forms, for exactness checks: S(A), lambda(A) = dS/dA, g(A).
FluctuationProfile synthetic_profile(const ParameterGrid& grid,
                                     const std::function<double(std::span<const double>)>& entropy,
                                     const std::function<Eigen::VectorXd(std::span<const double>)>& lambda,
                                     const std::function<Eigen::MatrixXd(std::span<const double>)>& metric);

HyperDistribution fluctuation_distribution(const FluctuationProfile& profile, std::span<const double> lambda0);

struct FluctuationMoments {
  Eigen::VectorXd mean_A;
  Eigen::VectorXd mean_lambda;
  Eigen::MatrixXd cov_A;
  Eigen::MatrixXd cov_lambda;
};

FluctuationMoments fluctuation_moments(const HyperDistribution& pi_A, const FluctuationProfile& profile);

struct FluctuationPeak {
  std::size_t node = 0;
  /// Argmax refined by a 3-node quadratic fit per axis.
  Eigen::VectorXd A0;
  Eigen::VectorXd lambda_at_node;
  /// Largest |lambda| change to a neighbouring node; the stationarity tolerance.
  double lambda_cell_bound = 0.0;
};

FluctuationPeak fluctuation_peak(const HyperDistribution& pi_A, const FluctuationProfile& profile);

struct CorrelationReport {
  /// <dlambda_alpha dA^beta> by direct quadrature.
  Eigen::MatrixXd direct;
  /// -d<lambda_alpha>/dlambda0_beta + (lambda0_alpha - <lambda_alpha>)(A0^beta - <A^beta>).
  Eigen::MatrixXd formula;
  /// max |direct - formula|.
  double agreement = 0.0;
  /// ||direct + I||_max.
  double canonical_deviation = 0.0;
  std::vector<double> steps;
};

CorrelationReport lambda_A_correlation(const FluctuationProfile& profile, std::span<const double> lambda0);

struct GaussianComparison {
  double total_variation = 0.0;
  std::size_t local_maxima = 0;
  std::vector<std::string> warnings;
};

/// Einstein approximation: Gaussian at the refined peak with covariance
/// g^-1(peak node), normalized on the grid.
GaussianComparison gaussian_comparison(const HyperDistribution& pi_A, const FluctuationProfile& profile);

/// Joint canonical multiplier of system + bath at the total A_T.
Eigen::VectorXd equilibrium_multiplier(const FluctuationScenario& scenario);

struct BathOracle {
  HyperDistribution pi_A;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// pi(A) proportional to e^{S(A) + S'(A_T - A)} det(g(A) + g'(A_T - A))^{1/2};
/// nodes with A_T - A outside the bath hull are excluded.
BathOracle finite_bath_oracle(const FluctuationScenario& scenario, const FluctuationProfile& profile);

struct FluctuationReport {
  FluctuationProfile profile;
  HyperDistribution pi_A;
  FluctuationMoments moments;
  FluctuationPeak peak;
  CorrelationReport correlation;
  GaussianComparison gaussian;
  std::optional<BathOracle> bath;
  /// Equilibrium multiplier used for the bath comparison.
  std::optional<Eigen::VectorXd> bath_lambda0;
  /// TV between the bath oracle and the large-bath formula at bath_lambda0.
  std::optional<double> bath_total_variation;
  std::vector<std::string> warnings;
};

FluctuationReport analyze(const FluctuationScenario& scenario, bool finite_bath = false);

}  // namespace hyperme
