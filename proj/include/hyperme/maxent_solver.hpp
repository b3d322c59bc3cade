#pragma once

// Canonical maximum-entropy solve: p0(x) = m(x) exp(-lambda . a(x)) / Z with
// the multipliers fixed by -d log Z / d lambda = A.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "hyperme/prob_core.hpp"

namespace hyperme {

struct SolverOptions {
  double tolerance = 1e-10;       // infinity norm of <a> - A
  int max_iterations = 200;
  double damping = 0.5;           // backtracking factor
  double feasibility_margin = 1e-9;

  void validate() const;
};

struct MaxEntSolution {
  Eigen::VectorXd lambda;
  double log_partition = 0.0;
  Distribution distribution;
  /// S(A) = log Z + lambda . A.
  double entropy = 0.0;
  /// C = <a a> - <a><a> = d^2 log Z / d lambda d lambda.
  Eigen::MatrixXd covariance;
  double residual = 0.0;
  int iterations = 0;
  /// Hessian was rank-deficient and the pseudo-inverse step was used.
  bool degenerate = false;
  /// Dual objective log Z + lambda . A after every accepted step, starting at lambda = 0.
  std::vector<double> dual_trace;
  /// Rounding band each step was accepted under: 0 for an Armijo step, else
  /// the allowed rise of the dual (the step had to shrink the residual).
  std::vector<double> dual_band;
  std::vector<std::string> warnings;
};

/// log sum_k dx_k m_k exp(-lambda . a_k), evaluated with the max shift.
double log_partition(std::span<const double> lambda, const SampleSpace& space,
                     std::span<const Observable> observables);

/// Damped Newton on the convex dual g(lambda) = log Z + lambda . A, started
/// at lambda = 0.
MaxEntSolution solve_lagrange(const ConstraintSet& constraints, const SolverOptions& options = {});

/// Canonical distribution at given multipliers; `targets` are set to the
/// resulting expectations, so the residual is zero by construction.
MaxEntSolution canonical_at(const SpacePtr& space, std::span<const Observable> observables,
                            std::span<const double> lambda);

/// Independent oracle: maximizes S[p] directly over the simplex by an
/// infeasible-start primal Newton method on the KKT system, with no
/// exponential-family ansatz. Limited to spaces of at most 64 points.
Distribution brute_force_maxent(const SpacePtr& space, std::span<const Observable> observables,
                                std::span<const double> targets);

}  // namespace hyperme
