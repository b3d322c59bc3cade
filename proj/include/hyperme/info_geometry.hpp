#pragma once

// Parameter grids, model families theta -> p(x|theta), and the Fisher-Rao
// metric g_ij = sum_k dx_k p_k d_i log p_k d_j log p_k.

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperme/maxent_solver.hpp"
#include "hyperme/prob_core.hpp"

namespace hyperme {

/// Default interior offset, as a fraction of the axis range.
inline constexpr double kDefaultBoundaryOffset = 1e-3;

/// One coordinate of the parameter space: strictly increasing nodes inside
/// the open interval (lower, upper), with trapezoid weights.
class Axis {
 public:
  /// `nodes` equally spaced points on [lower + offset*range, upper - offset*range].
  static Axis uniform(std::string name, double lower, double upper, std::size_t nodes,
                      double offset_fraction = kDefaultBoundaryOffset);
  /// Arbitrary increasing nodes; weights are trapezoid weights of the node set.
  static Axis from_nodes(std::string name, std::vector<double> nodes, double lower, double upper);
  /// A parameter held at one value; the cell has the given width.
  static Axis single(std::string name, double node, double width);

  const std::string& name() const noexcept { return name_; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double range() const noexcept { return upper_ - lower_; }

 private:
  Axis(std::string name, std::vector<double> nodes, std::vector<double> weights, double lower,
       double upper);

  std::string name_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

/// Tensor-product grid; flat indices are row-major (last axis fastest).
class ParameterGrid {
 public:
  explicit ParameterGrid(std::vector<Axis> axes);

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return size_; }
  const Axis& axis(std::size_t i) const { return axes_.at(i); }
  std::span<const Axis> axes() const noexcept { return axes_; }

  std::vector<std::size_t> multi_index(std::size_t flat) const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;
  std::vector<double> coords(std::size_t flat) const;
  /// Product of the per-axis trapezoid weights.
  double weight(std::size_t flat) const;
  bool contains(std::span<const double> theta) const;

 private:
  std::vector<Axis> axes_;
  std::size_t size_ = 0;
};

enum class FamilyKind {
  kByTarget,      // theta = A, p from the maxent solver at target_scale * theta
  kByMultiplier,  // theta = lambda
  kExplicit,      // user-supplied p(x|theta)
};

using FamilyEvaluator = std::function<Distribution(std::span<const double> theta)>;

class ModelFamily {
 public:
  /// Canonical family in target coordinates. With target_scale s the solver
  /// is asked for <a> = s * theta (used for n-fold products whose summed
  /// observable has mean n * theta).
  static ModelFamily by_target(SpacePtr space, std::vector<Observable> observables,
                               ParameterGrid grid, double target_scale = 1.0,
                               SolverOptions options = {});
  static ModelFamily by_multiplier(SpacePtr space, std::vector<Observable> observables,
                                   ParameterGrid grid);
  static ModelFamily explicit_family(SpacePtr space, ParameterGrid grid, FamilyEvaluator evaluator,
                                     std::string name = "explicit");

  FamilyKind kind() const noexcept { return kind_; }
  bool exponential() const noexcept { return kind_ != FamilyKind::kExplicit; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  const ParameterGrid& grid() const noexcept { return grid_; }
  std::span<const Observable> observables() const noexcept { return observables_; }
  double target_scale() const noexcept { return target_scale_; }
  const SolverOptions& solver_options() const noexcept { return options_; }
  const std::string& name() const noexcept { return name_; }

  /// Canonical solution at theta; exponential kinds only.
  MaxEntSolution solve(std::span<const double> theta) const;
  Distribution evaluate(std::span<const double> theta) const;
  Distribution evaluate_node(std::size_t flat) const { return evaluate(grid_.coords(flat)); }

 private:
  ModelFamily() = default;

  FamilyKind kind_ = FamilyKind::kExplicit;
  SpacePtr space_;
  std::vector<Observable> observables_;
  ParameterGrid grid_{{Axis::single("theta", 0.0, 1.0)}};
  double target_scale_ = 1.0;
  SolverOptions options_;
  FamilyEvaluator evaluator_;
  std::string name_;
};

enum class MetricMethod {
  kAuto,              // analytic for exponential kinds, finite differences otherwise
  kAnalytic,
  kFiniteDifference,
};

const char* to_string(MetricMethod method) noexcept;

/// Central-difference step for axis i at coordinate x: max(1e-4*range, 1e-6),
/// capped at 1% of the distance to the nearer bound so the stencil
/// always stays inside the open interval.
double stencil_step(const Axis& axis, double x);

Eigen::MatrixXd fisher_metric(const ModelFamily& family, std::span<const double> theta,
                              MetricMethod method = MetricMethod::kAuto);
inline Eigen::MatrixXd fisher_metric(const ModelFamily& family, std::size_t flat,
                                     MetricMethod method = MetricMethod::kAuto) {
  return fisher_metric(family, family.grid().coords(flat), method);
}

/// Analytic metric from an already solved node: C for multiplier
/// coordinates, s^2 C^-1 for target coordinates with target scale s.
Eigen::MatrixXd metric_from_solution(const ModelFamily& family, const MaxEntSolution& solution);

/// Pivoted-LU determinant, clamped to zero within -1e-12 * scale; a more
/// negative value raises a numerical-failure error.
double metric_determinant(const Eigen::MatrixXd& g);

struct MetricField {
  ParameterGrid grid;
  std::vector<Eigen::MatrixXd> g;
  std::vector<double> det;
  MetricMethod method = MetricMethod::kAuto;
};

MetricField metric_field(const ModelFamily& family, MetricMethod method = MetricMethod::kAuto);

/// Separable coordinate change theta'_i = phi_i(theta_i), each phi_i strictly
/// monotone on its axis bounds.
struct Reparametrization {
  std::string name;
  std::function<double(std::size_t axis, double x)> forward;
  std::function<double(std::size_t axis, double x)> derivative;

  static Reparametrization identity();
  static Reparametrization scale(double c);
  static Reparametrization square();
};

/// g' = J^-T g J^-1 on the image grid (nodes phi(theta), trapezoid weights of
/// the image nodes; decreasing maps reverse the axis).
MetricField pullback_metric(const MetricField& field, const Reparametrization& phi);

/// -d^2 f / dtheta dtheta by central second differences with stencil_step().
Eigen::MatrixXd negative_hessian(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> theta, const ParameterGrid& grid);

/// -d^2 S / dA dA for a target-coordinate family.
Eigen::MatrixXd hessian_entropy(const ModelFamily& family, std::span<const double> theta);

}  // namespace hyperme
