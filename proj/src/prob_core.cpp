#include "hyperme/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperme/error.hpp"
#include "hyperme/kernels.hpp"

namespace hyperme {
namespace {

constexpr const char* kModule = "prob-core";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, kModule, message);
}

void require_same_space(const SampleSpace& a, const SampleSpace& b, const char* what) {
  if (!a.same_as(b)) fail(ErrorKind::kUsage, std::string(what) + ": arguments live on different sample spaces");
}

}  // namespace

// ---------------------------------------------------------------------------
// SampleSpace

SampleSpace::SampleSpace(std::vector<double> points, std::vector<double> cell_volumes,
                         std::vector<double> measure, std::vector<double> log_measure)
    : points_(std::move(points)),
      cell_volumes_(std::move(cell_volumes)),
      measure_(std::move(measure)),
      log_measure_(std::move(log_measure)) {
  const std::size_t n = points_.size();
  if (n == 0) fail(ErrorKind::kDegenerate, "sample space has no points");
  if (cell_volumes_.size() != n || measure_.size() != n || log_measure_.size() != n) {
    fail(ErrorKind::kUsage, "points, cell volumes and measure must have equal length");
  }
  log_weight_.resize(n);
  bool any_positive = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(cell_volumes_[k] > 0.0) || !std::isfinite(cell_volumes_[k])) {
      fail(ErrorKind::kDomain, "cell volume at point " + std::to_string(k) + " must be positive and finite");
    }
    if (!(measure_[k] >= 0.0) || std::isnan(log_measure_[k]) || log_measure_[k] == std::numeric_limits<double>::infinity()) {
      fail(ErrorKind::kDomain, "measure at point " + std::to_string(k) + " must be nonnegative and finite");
    }
    if (!std::isfinite(points_[k])) fail(ErrorKind::kDomain, "point coordinates must be finite");
    any_positive = any_positive || log_measure_[k] > kNegInf;
    log_weight_[k] = log_measure_[k] == kNegInf ? kNegInf : std::log(cell_volumes_[k]) + log_measure_[k];
  }
  if (!any_positive) fail(ErrorKind::kDegenerate, "measure vanishes everywhere");
  log_total_mass_ = kernels::log_sum_exp(log_weight_);
  if (!std::isfinite(log_total_mass_)) fail(ErrorKind::kDomain, "total measure mass is not finite");
}

SpacePtr SampleSpace::create(std::vector<double> points, std::vector<double> cell_volumes,
                             std::vector<double> measure) {
  std::vector<double> log_measure(measure.size());
  for (std::size_t k = 0; k < measure.size(); ++k) {
    if (std::isnan(measure[k]) || measure[k] < 0.0 || std::isinf(measure[k])) {
      fail(ErrorKind::kDomain, "measure at point " + std::to_string(k) + " must be nonnegative and finite");
    }
    log_measure[k] = measure[k] > 0.0 ? std::log(measure[k]) : kNegInf;
  }
  return SpacePtr(new SampleSpace(std::move(points), std::move(cell_volumes), std::move(measure),
                                  std::move(log_measure)));
}

SpacePtr SampleSpace::from_log_measure(std::vector<double> points, std::vector<double> cell_volumes,
                                       std::vector<double> log_measure) {
  std::vector<double> measure(log_measure.size());
  for (std::size_t k = 0; k < log_measure.size(); ++k) measure[k] = std::exp(log_measure[k]);
  return SpacePtr(new SampleSpace(std::move(points), std::move(cell_volumes), std::move(measure),
                                  std::move(log_measure)));
}

bool SampleSpace::same_as(const SampleSpace& other) const noexcept {
  if (this == &other) return true;
  return points_ == other.points_ && cell_volumes_ == other.cell_volumes_ &&
         measure_ == other.measure_;
}

// ---------------------------------------------------------------------------
// Distribution, Observable, ConstraintSet

Distribution::Distribution(SpacePtr space, std::vector<double> density)
    : space_(std::move(space)), density_(std::move(density)) {
  if (!space_) fail(ErrorKind::kUsage, "distribution without a sample space");
  if (density_.size() != space_->size()) {
    fail(ErrorKind::kUsage, "density length does not match the sample space");
  }
  for (std::size_t k = 0; k < density_.size(); ++k) {
    if (!(density_[k] >= 0.0) || !std::isfinite(density_[k])) {
      fail(ErrorKind::kDomain, "density at point " + std::to_string(k) + " must be nonnegative and finite");
    }
  }
  const double mass = kernels::dot(density_, space_->cell_volumes());
  if (std::abs(mass - 1.0) > kRenormalizeWindow) {
    std::ostringstream os;
    os << "density mass " << mass << " is not within " << kRenormalizeWindow << " of one";
    fail(ErrorKind::kDomain, os.str());
  }
  if (mass != 1.0) {
    for (double& v : density_) v /= mass;
  }
}

Observable::Observable(SpacePtr space, std::vector<double> values, std::string name)
    : space_(std::move(space)), values_(std::move(values)), name_(std::move(name)) {
  if (!space_) fail(ErrorKind::kUsage, "observable without a sample space");
  if (values_.size() != space_->size()) {
    fail(ErrorKind::kUsage, "observable '" + name_ + "' length does not match the sample space");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) fail(ErrorKind::kDomain, "observable '" + name_ + "' has non-finite values");
  }
}

ConstraintSet::ConstraintSet(std::vector<Observable> observables, std::vector<double> targets)
    : observables_(std::move(observables)), targets_(std::move(targets)) {
  if (observables_.empty()) fail(ErrorKind::kUsage, "constraint set needs at least one observable");
  if (observables_.size() != targets_.size()) {
    fail(ErrorKind::kUsage, "constraint set: one target per observable required");
  }
  for (const auto& a : observables_) require_same_space(a.space(), observables_.front().space(), "constraint set");
  for (double t : targets_) {
    if (!std::isfinite(t)) fail(ErrorKind::kDomain, "constraint targets must be finite");
  }
}

// ---------------------------------------------------------------------------
// Operations

double relative_entropy(const Distribution& p) { return relative_entropy(p, p.space()); }

double relative_entropy(const Distribution& p, const SampleSpace& measure_space) {
  const SampleSpace& space = p.space();
  if (measure_space.size() != space.size()) {
    fail(ErrorKind::kUsage, "relative_entropy: measure space does not match the distribution");
  }
  const auto density = p.density();
  const auto log_m = measure_space.log_measure();
  for (std::size_t k = 0; k < density.size(); ++k) {
    if (density[k] > 0.0 && log_m[k] == kNegInf) {
      fail(ErrorKind::kDomain, "support violation: p > 0 where m = 0 at point " + std::to_string(k));
    }
  }
  return -kernels::plogp_ratio(space.cell_volumes(), density, log_m);
}

double expectation(const Distribution& p, const Observable& a) {
  require_same_space(p.space(), a.space(), "expectation");
  return kernels::dot3(p.space().cell_volumes(), p.density(), a.values());
}

Distribution normalize(SpacePtr space, std::span<const double> f) {
  if (!space) fail(ErrorKind::kUsage, "normalize: missing sample space");
  if (f.size() != space->size()) fail(ErrorKind::kUsage, "normalize: field length does not match the space");
  for (double v : f) {
    if (!(v >= 0.0)) fail(ErrorKind::kDomain, "normalize: field must be nonnegative");
  }
  const double mass = kernels::dot(f, space->cell_volumes());
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    fail(ErrorKind::kDegenerate, "normalize: total mass is zero or not finite");
  }
  std::vector<double> density(f.begin(), f.end());
  for (double& v : density) v /= mass;
  return Distribution(std::move(space), std::move(density));
}

Distribution normalized_measure(const SpacePtr& space) {
  // exp(log m - log total) stays finite for measures that overflow in linear form.
  std::vector<double> density(space->size());
  kernels::exp_shifted(space->log_measure(), space->log_total_mass(), density);
  return Distribution(space, std::move(density));
}

// ---------------------------------------------------------------------------
// Builders

namespace spaces {

SpacePtr two_state() { return k_state(2); }

SpacePtr k_state(std::size_t k) {
  if (k == 0) fail(ErrorKind::kUsage, "k_state: k must be positive");
  std::vector<double> points(k);
  for (std::size_t i = 0; i < k; ++i) points[i] = static_cast<double>(i);
  return SampleSpace::create(std::move(points), std::vector<double>(k, 1.0), std::vector<double>(k, 1.0));
}

SpacePtr binomial_units(std::size_t n) {
  std::vector<double> points(n + 1), log_m(n + 1);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    points[k] = kk;
    log_m[k] = std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
  }
  return SampleSpace::from_log_measure(std::move(points), std::vector<double>(n + 1, 1.0), std::move(log_m));
}

SpacePtr uniform_grid(double x_min, double x_max, std::size_t count) {
  if (count < 2 || !(x_max > x_min)) fail(ErrorKind::kUsage, "uniform_grid: need count >= 2 and x_max > x_min");
  const double h = (x_max - x_min) / static_cast<double>(count - 1);
  std::vector<double> points(count), dx(count, h);
  for (std::size_t k = 0; k < count; ++k) points[k] = x_min + h * static_cast<double>(k);
  points.back() = x_max;
  dx.front() = dx.back() = 0.5 * h;
  return SampleSpace::create(std::move(points), std::move(dx), std::vector<double>(count, 1.0));
}

SpacePtr product(const SampleSpace& base, int n, std::size_t max_points) {
  if (n < 1) fail(ErrorKind::kUsage, "product: n must be >= 1");
  const std::size_t m = base.size();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (total > max_points / m) {
      fail(ErrorKind::kResource, "product space |X|^" + std::to_string(n) + " exceeds " +
                                     std::to_string(max_points) + " points");
    }
    total *= m;
  }
  std::vector<double> points(total), dx(total, 1.0), log_m(total, 0.0);
  const auto base_dx = base.cell_volumes();
  const auto base_lm = base.log_measure();
  for (std::size_t flat = 0; flat < total; ++flat) {
    points[flat] = static_cast<double>(flat);
    std::size_t rest = flat;
    for (int i = 0; i < n; ++i) {
      const std::size_t k = rest % m;
      rest /= m;
      dx[flat] *= base_dx[k];
      log_m[flat] += base_lm[k];
    }
  }
  return SampleSpace::from_log_measure(std::move(points), std::move(dx), std::move(log_m));
}

}  // namespace spaces

namespace observables {

Observable identity(const SpacePtr& space, std::string name) {
  const auto pts = space->points();
  return Observable(space, std::vector<double>(pts.begin(), pts.end()), std::move(name));
}

Observable power(const SpacePtr& space, double exponent, std::string name) {
  return from_function(space, [exponent](double x) { return std::pow(x, exponent); }, std::move(name));
}

Observable from_function(const SpacePtr& space, const std::function<double(double)>& f,
                         std::string name) {
  std::vector<double> values(space->size());
  const auto pts = space->points();
  std::transform(pts.begin(), pts.end(), values.begin(), f);
  return Observable(space, std::move(values), std::move(name));
}

Observable product_sum(const Observable& base, const SpacePtr& product_space, int n) {
  const std::size_t m = base.space().size();
  std::vector<double> values(product_space->size(), 0.0);
  const auto a = base.values();
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    std::size_t rest = flat;
    for (int i = 0; i < n; ++i) {
      values[flat] += a[rest % m];
      rest /= m;
    }
  }
  return Observable(product_space, std::move(values), base.name());
}

}  // namespace observables

}  // namespace hyperme
