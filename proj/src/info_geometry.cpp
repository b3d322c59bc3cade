#include "hyperme/info_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperme/error.hpp"
#include "hyperme/parallel.hpp"

namespace hyperme {
namespace {

constexpr const char* kModule = "info-geometry";

std::vector<double> trapezoid_weights(std::span<const double> x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double half = 0.5 * (x[k + 1] - x[k]);
    w[k] += half;
    w[k + 1] += half;
  }
  return w;
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& c) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 1e-300).any()) {
    throw Error(ErrorKind::kNumericalFailure, kModule,
                "covariance is singular; the target-coordinate metric is undefined");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Axis / ParameterGrid

Axis::Axis(std::string name, std::vector<double> nodes, std::vector<double> weights, double lower,
           double upper)
    : name_(std::move(name)),
      nodes_(std::move(nodes)),
      weights_(std::move(weights)),
      lower_(lower),
      upper_(upper) {}

Axis Axis::uniform(std::string name, double lower, double upper, std::size_t nodes,
                   double offset_fraction) {
  if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
    throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': need finite lower < upper");
  }
  if (!(offset_fraction > 0.0 && offset_fraction < 0.5)) {
    throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': boundary offset must lie in (0, 0.5)");
  }
  if (nodes < 2) throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': at least 2 nodes");
  const double range = upper - lower;
  const double a = lower + offset_fraction * range;
  const double b = upper - offset_fraction * range;
  std::vector<double> x(nodes);
  const double h = (b - a) / static_cast<double>(nodes - 1);
  for (std::size_t k = 0; k < nodes; ++k) x[k] = a + h * static_cast<double>(k);
  x.back() = b;
  auto w = trapezoid_weights(x);
  return Axis(std::move(name), std::move(x), std::move(w), lower, upper);
}

Axis Axis::from_nodes(std::string name, std::vector<double> nodes, double lower, double upper) {
  if (nodes.size() < 2) throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': at least 2 nodes");
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!std::isfinite(nodes[k]) || (k > 0 && !(nodes[k] > nodes[k - 1]))) {
      throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': nodes must be finite and strictly increasing");
    }
  }
  if (!(nodes.front() > lower && nodes.back() < upper)) {
    throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': nodes must lie strictly inside the bounds");
  }
  auto w = trapezoid_weights(nodes);
  return Axis(std::move(name), std::move(nodes), std::move(w), lower, upper);
}

Axis Axis::single(std::string name, double node, double width) {
  if (!(std::isfinite(node) && width > 0.0 && std::isfinite(width))) {
    throw Error(ErrorKind::kUsage, kModule, "axis '" + name + "': single node needs a finite node and width > 0");
  }
  return Axis(std::move(name), {node}, {width}, node - 0.5 * width, node + 0.5 * width);
}

ParameterGrid::ParameterGrid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw Error(ErrorKind::kUsage, kModule, "parameter grid needs at least one axis");
  size_ = 1;
  for (const auto& a : axes_) size_ *= a.size();
}

std::vector<std::size_t> ParameterGrid::multi_index(std::size_t flat) const {
  std::vector<std::size_t> idx(axes_.size());
  for (std::size_t i = axes_.size(); i-- > 0;) {
    idx[i] = flat % axes_[i].size();
    flat /= axes_[i].size();
  }
  return idx;
}

std::size_t ParameterGrid::flat_index(std::span<const std::size_t> multi) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < axes_.size(); ++i) flat = flat * axes_[i].size() + multi[i];
  return flat;
}

std::vector<double> ParameterGrid::coords(std::size_t flat) const {
  const auto idx = multi_index(flat);
  std::vector<double> theta(axes_.size());
  for (std::size_t i = 0; i < axes_.size(); ++i) theta[i] = axes_[i].nodes()[idx[i]];
  return theta;
}

double ParameterGrid::weight(std::size_t flat) const {
  const auto idx = multi_index(flat);
  double w = 1.0;
  for (std::size_t i = 0; i < axes_.size(); ++i) w *= axes_[i].weights()[idx[i]];
  return w;
}

bool ParameterGrid::contains(std::span<const double> theta) const {
  if (theta.size() != axes_.size()) return false;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (!(theta[i] > axes_[i].lower() && theta[i] < axes_[i].upper())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// ModelFamily

ModelFamily ModelFamily::by_target(SpacePtr space, std::vector<Observable> observables,
                                   ParameterGrid grid, double target_scale, SolverOptions options) {
  if (observables.size() != grid.dim()) {
    throw Error(ErrorKind::kUsage, kModule, "target family: one axis per observable required");
  }
  if (!(target_scale > 0.0)) throw Error(ErrorKind::kUsage, kModule, "target_scale must be positive");
  options.validate();
  ModelFamily f;
  f.kind_ = FamilyKind::kByTarget;
  f.space_ = std::move(space);
  f.observables_ = std::move(observables);
  f.grid_ = std::move(grid);
  f.target_scale_ = target_scale;
  f.options_ = options;
  f.name_ = "target";
  return f;
}

ModelFamily ModelFamily::by_multiplier(SpacePtr space, std::vector<Observable> observables,
                                       ParameterGrid grid) {
  if (observables.size() != grid.dim()) {
    throw Error(ErrorKind::kUsage, kModule, "multiplier family: one axis per observable required");
  }
  ModelFamily f;
  f.kind_ = FamilyKind::kByMultiplier;
  f.space_ = std::move(space);
  f.observables_ = std::move(observables);
  f.grid_ = std::move(grid);
  f.name_ = "multiplier";
  return f;
}

ModelFamily ModelFamily::explicit_family(SpacePtr space, ParameterGrid grid, FamilyEvaluator evaluator,
                                         std::string name) {
  if (!evaluator) throw Error(ErrorKind::kUsage, kModule, "explicit family needs an evaluator");
  ModelFamily f;
  f.kind_ = FamilyKind::kExplicit;
  f.space_ = std::move(space);
  f.grid_ = std::move(grid);
  f.evaluator_ = std::move(evaluator);
  f.name_ = std::move(name);
  return f;
}

MaxEntSolution ModelFamily::solve(std::span<const double> theta) const {
  if (theta.size() != grid_.dim()) throw Error(ErrorKind::kUsage, kModule, "theta has the wrong dimension");
  switch (kind_) {
    case FamilyKind::kByTarget: {
      std::vector<double> targets(theta.begin(), theta.end());
      for (double& t : targets) t *= target_scale_;
      return solve_lagrange(ConstraintSet(observables_, std::move(targets)), options_);
    }
    case FamilyKind::kByMultiplier:
      return canonical_at(space_, observables_, theta);
    case FamilyKind::kExplicit:
      break;
  }
  throw Error(ErrorKind::kUsage, kModule, "solve() is only defined for exponential families");
}

Distribution ModelFamily::evaluate(std::span<const double> theta) const {
  if (kind_ == FamilyKind::kExplicit) {
    Distribution p = evaluator_(theta);
    if (!p.space().same_as(*space_)) {
      throw Error(ErrorKind::kUsage, kModule, "explicit family returned a density on a different space");
    }
    return p;
  }
  return solve(theta).distribution;
}

// ---------------------------------------------------------------------------
// Metric

const char* to_string(MetricMethod method) noexcept {
  switch (method) {
    case MetricMethod::kAuto: return "auto";
    case MetricMethod::kAnalytic: return "analytic-exponential";
    case MetricMethod::kFiniteDifference: return "finite-difference-score";
  }
  return "unknown";
}

double stencil_step(const Axis& axis, double x) {
  const double base = std::max(1e-4 * axis.range(), 1e-6);
  const double room = std::min(x - axis.lower(), axis.upper() - x);
  if (!(room > 0.0)) {
    std::ostringstream os;
    os << "stencil at " << axis.name() << " = " << x << " leaves the bounds (" << axis.lower() << ", "
       << axis.upper() << ")";
    throw Error(ErrorKind::kBoundary, kModule, os.str());
  }
  return std::min(base, 0.01 * room);
}

namespace {

constexpr double kNegligibleMass = 1e-250;

Eigen::MatrixXd score_metric(const ModelFamily& family, std::span<const double> theta) {
  const ParameterGrid& grid = family.grid();
  const std::size_t d = grid.dim();
  const Distribution center = family.evaluate(theta);
  const std::size_t n = center.size();
  const auto dx = family.space_ptr()->cell_volumes();

  std::vector<std::vector<double>> score(d, std::vector<double>(n, 0.0));
  std::vector<char> active(n, 1);
  for (std::size_t i = 0; i < d; ++i) {
    const double h = stencil_step(grid.axis(i), theta[i]);
    std::vector<double> tp(theta.begin(), theta.end()), tm(theta.begin(), theta.end());
    tp[i] += h;
    tm[i] -= h;
    const Distribution pp = family.evaluate(tp);
    const Distribution pm = family.evaluate(tm);
    for (std::size_t k = 0; k < n; ++k) {
      const bool zp = pp[k] == 0.0, zm = pm[k] == 0.0, zc = center[k] == 0.0;
      // Underflowed tails (e.g. a Gaussian far from its mean) carry no
      // metric weight; only a zero next to real mass is a support change.
      if ((zp && zm && zc) || std::max({pp[k], pm[k], center[k]}) * dx[k] < kNegligibleMass) {
        active[k] = 0;
        continue;
      }
      if (zp || zm || zc) {
        std::ostringstream os;
        os << "support changes across the stencil at point " << k << " (axis " << grid.axis(i).name() << ")";
        throw Error(ErrorKind::kDomain, kModule, os.str());
      }
      score[i][k] = (std::log(pp[k]) - std::log(pm[k])) / (2.0 * h);
    }
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < n; ++k) {
    if (!active[k]) continue;
    const double w = dx[k] * center[k];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) g(i, j) += w * score[i][k] * score[j][k];
    }
  }
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace

Eigen::MatrixXd fisher_metric(const ModelFamily& family, std::span<const double> theta,
                              MetricMethod method) {
  if (theta.size() != family.grid().dim()) {
    throw Error(ErrorKind::kUsage, kModule, "theta has the wrong dimension");
  }
  if (method == MetricMethod::kAuto) {
    method = family.exponential() ? MetricMethod::kAnalytic : MetricMethod::kFiniteDifference;
  }
  if (method == MetricMethod::kAnalytic) {
    if (!family.exponential()) {
      throw Error(ErrorKind::kUsage, kModule, "analytic metric requires an exponential family");
    }
    return metric_from_solution(family, family.solve(theta));
  }
  return score_metric(family, theta);
}

Eigen::MatrixXd metric_from_solution(const ModelFamily& family, const MaxEntSolution& solution) {
  if (family.kind() == FamilyKind::kByMultiplier) return solution.covariance;
  if (family.kind() != FamilyKind::kByTarget) {
    throw Error(ErrorKind::kUsage, kModule, "analytic metric requires an exponential family");
  }
  const double s = family.target_scale();
  return s * s * invert_spd(solution.covariance);
}

double metric_determinant(const Eigen::MatrixXd& g) {
  if (g.rows() != g.cols() || g.rows() == 0) throw Error(ErrorKind::kUsage, kModule, "metric must be square");
  double det = g.rows() == 1 ? g(0, 0) : g.fullPivLu().determinant();
  double scale = 1.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) scale *= std::max(std::abs(g(i, i)), std::numeric_limits<double>::min());
  if (!std::isfinite(det)) throw Error(ErrorKind::kNumericalFailure, kModule, "metric determinant is not finite");
  if (det < 0.0) {
    if (det < -1e-12 * scale) {
      std::ostringstream os;
      os << "metric determinant " << det << " is negative beyond rounding; Fisher metrics are PSD";
      throw Error(ErrorKind::kNumericalFailure, kModule, os.str());
    }
    det = 0.0;
  }
  return det;
}

MetricField metric_field(const ModelFamily& family, MetricMethod method) {
  const ParameterGrid& grid = family.grid();
  MetricField field{grid, std::vector<Eigen::MatrixXd>(grid.size()), std::vector<double>(grid.size()), method};
  parallel_for(grid.size(), [&](std::size_t k) {
    field.g[k] = fisher_metric(family, grid.coords(k), method);
    field.det[k] = metric_determinant(field.g[k]);
  });
  if (method == MetricMethod::kAuto) {
    field.method = family.exponential() ? MetricMethod::kAnalytic : MetricMethod::kFiniteDifference;
  }
  return field;
}

// ---------------------------------------------------------------------------
// Reparametrization

Reparametrization Reparametrization::identity() {
  return {"identity", [](std::size_t, double x) { return x; }, [](std::size_t, double) { return 1.0; }};
}

Reparametrization Reparametrization::scale(double c) {
  if (!(std::isfinite(c) && c != 0.0)) throw Error(ErrorKind::kSingularity, kModule, "scale map needs a finite nonzero factor");
  return {"scale", [c](std::size_t, double x) { return c * x; }, [c](std::size_t, double) { return c; }};
}

Reparametrization Reparametrization::square() {
  return {"square", [](std::size_t, double x) { return x * x; }, [](std::size_t, double x) { return 2.0 * x; }};
}

MetricField pullback_metric(const MetricField& field, const Reparametrization& phi) {
  const ParameterGrid& grid = field.grid;
  const std::size_t d = grid.dim();

  std::vector<Axis> image_axes;
  std::vector<char> reversed(d, 0);
  for (std::size_t i = 0; i < d; ++i) {
    const Axis& a = grid.axis(i);
    std::vector<double> y(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) y[k] = phi.forward(i, a.nodes()[k]);
    double lo = phi.forward(i, a.lower()), hi = phi.forward(i, a.upper());
    if (a.size() > 1 && y.back() < y.front()) {
      reversed[i] = 1;
      std::reverse(y.begin(), y.end());
      std::swap(lo, hi);
    }
    for (std::size_t k = 1; k < y.size(); ++k) {
      if (!(y[k] > y[k - 1])) {
        throw Error(ErrorKind::kSingularity, kModule,
                    "reparametrization '" + phi.name + "' is not strictly monotone on axis " + a.name());
      }
    }
    if (a.size() == 1) {
      const double width = std::abs(phi.derivative(i, a.nodes()[0])) * a.weights()[0];
      if (!(width > 0.0)) throw Error(ErrorKind::kSingularity, kModule, "singular Jacobian on a single-node axis");
      image_axes.push_back(Axis::single(a.name(), y[0], width));
    } else {
      image_axes.push_back(Axis::from_nodes(a.name(), std::move(y), lo, hi));
    }
  }

  ParameterGrid image(std::move(image_axes));
  MetricField out{image, std::vector<Eigen::MatrixXd>(image.size()), std::vector<double>(image.size()), field.method};
  for (std::size_t flat = 0; flat < image.size(); ++flat) {
    auto idx = image.multi_index(flat);
    for (std::size_t i = 0; i < d; ++i) {
      if (reversed[i]) idx[i] = grid.axis(i).size() - 1 - idx[i];
    }
    const std::size_t src = grid.flat_index(idx);
    const auto theta = grid.coords(src);
    Eigen::VectorXd jinv(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      const double j = phi.derivative(i, theta[i]);
      if (!(std::isfinite(j) && j != 0.0)) {
        std::ostringstream os;
        os << "singular Jacobian of '" << phi.name << "' at " << grid.axis(i).name() << " = " << theta[i];
        throw Error(ErrorKind::kSingularity, kModule, os.str());
      }
      jinv(static_cast<Eigen::Index>(i)) = 1.0 / j;
    }
    out.g[flat] = jinv.asDiagonal() * field.g[src] * jinv.asDiagonal();
    out.det[flat] = metric_determinant(out.g[flat]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entropy Hessian

Eigen::MatrixXd negative_hessian(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> theta, const ParameterGrid& grid) {
  const std::size_t d = grid.dim();
  if (theta.size() != d) throw Error(ErrorKind::kUsage, kModule, "theta has the wrong dimension");
  std::vector<double> h(d);
  for (std::size_t i = 0; i < d; ++i) h[i] = stencil_step(grid.axis(i), theta[i]);

  std::vector<double> t(theta.begin(), theta.end());
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    t.assign(theta.begin(), theta.end());
    t[i] += di;
    t[j] += dj;
    return f(t);
  };
  const double f0 = f(theta);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    const double fp = at(i, h[i], i, 0.0);
    const double fm = at(i, -h[i], i, 0.0);
    out(i, i) = -(fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double fpp = at(i, h[i], j, h[j]);
      const double fpm = at(i, h[i], j, -h[j]);
      const double fmp = at(i, -h[i], j, h[j]);
      const double fmm = at(i, -h[i], j, -h[j]);
      out(i, j) = out(j, i) = -(fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return out;
}

Eigen::MatrixXd hessian_entropy(const ModelFamily& family, std::span<const double> theta) {
  if (family.kind() != FamilyKind::kByTarget) {
    throw Error(ErrorKind::kUsage, kModule, "hessian_entropy needs a family in target coordinates");
  }
  return negative_hessian([&](std::span<const double> a) { return family.solve(a).entropy; }, theta,
                          family.grid());
}

}  // namespace hyperme
