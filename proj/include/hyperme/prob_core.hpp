#pragma once

// Discretized probability spaces, densities over them, and the relative
// entropy S[p] = -sum_k dx_k p_k log(p_k / m_k).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hyperme {

/// Mass deviation accepted as rounding; distributions are stored normalized to it.
inline constexpr double kNormalizationTolerance = 1e-9;
/// Inputs within this of unit mass are renormalized; worse inputs are rejected.
inline constexpr double kRenormalizeWindow = 1e-6;

class SampleSpace;
using SpacePtr = std::shared_ptr<const SampleSpace>;

/// Grid over the microstate space X: one coordinate, one cell volume dx_k and
/// one measure value m_k per point. Immutable; shared through SpacePtr.
class SampleSpace {
 public:
  static SpacePtr create(std::vector<double> points, std::vector<double> cell_volumes,
                         std::vector<double> measure);
  /// For measures whose values are only representable in log form
  /// (e.g. binomial state counts); log_measure = -inf marks m = 0.
  static SpacePtr from_log_measure(std::vector<double> points, std::vector<double> cell_volumes,
                                   std::vector<double> log_measure);

  std::size_t size() const noexcept { return points_.size(); }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> cell_volumes() const noexcept { return cell_volumes_; }
  std::span<const double> measure() const noexcept { return measure_; }
  std::span<const double> log_measure() const noexcept { return log_measure_; }
  /// log(dx_k m_k); -inf off the support.
  std::span<const double> log_weight() const noexcept { return log_weight_; }

  bool in_support(std::size_t k) const noexcept { return measure_[k] > 0.0; }
  /// log sum_k m_k dx_k.
  double log_total_mass() const noexcept { return log_total_mass_; }

  /// Same object, or identical point/volume/measure arrays.
  bool same_as(const SampleSpace& other) const noexcept;

 private:
  SampleSpace(std::vector<double> points, std::vector<double> cell_volumes,
              std::vector<double> measure, std::vector<double> log_measure);

  std::vector<double> points_;
  std::vector<double> cell_volumes_;
  std::vector<double> measure_;
  std::vector<double> log_measure_;
  std::vector<double> log_weight_;
  double log_total_mass_ = 0.0;
};

/// Normalized density over a SampleSpace: sum_k p_k dx_k = 1.
class Distribution {
 public:
  /// Validates nonnegativity; renormalizes when the mass is within
  /// kRenormalizeWindow of one, throws a domain error otherwise.
  Distribution(SpacePtr space, std::vector<double> density);

  const SampleSpace& space() const noexcept { return *space_; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  std::span<const double> density() const noexcept { return density_; }
  double operator[](std::size_t k) const noexcept { return density_[k]; }
  std::size_t size() const noexcept { return density_.size(); }

 private:
  SpacePtr space_;
  std::vector<double> density_;
};

/// Real function a(x) tabulated on a SampleSpace.
class Observable {
 public:
  Observable(SpacePtr space, std::vector<double> values, std::string name);

  const SampleSpace& space() const noexcept { return *space_; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::string& name() const noexcept { return name_; }

 private:
  SpacePtr space_;
  std::vector<double> values_;
  std::string name_;
};

/// Expectation constraints <a^alpha> = A^alpha sharing one SampleSpace.
class ConstraintSet {
 public:
  ConstraintSet(std::vector<Observable> observables, std::vector<double> targets);

  std::size_t size() const noexcept { return observables_.size(); }
  const SpacePtr& space_ptr() const noexcept { return observables_.front().space_ptr(); }
  const SampleSpace& space() const noexcept { return *space_ptr(); }
  std::span<const Observable> observables() const noexcept { return observables_; }
  std::span<const double> targets() const noexcept { return targets_; }

 private:
  std::vector<Observable> observables_;
  std::vector<double> targets_;
};

/// S[p] against the measure of p's own space.
double relative_entropy(const Distribution& p);
/// S[p] against the measure of `measure_space`, which must match p's grid.
double relative_entropy(const Distribution& p, const SampleSpace& measure_space);

/// sum_k dx_k p_k a_k.
double expectation(const Distribution& p, const Observable& a);

/// f / sum_k f_k dx_k. Throws a degenerate error on zero or non-finite mass.
Distribution normalize(SpacePtr space, std::span<const double> f);

/// The prior measure m normalized to unit mass.
Distribution normalized_measure(const SpacePtr& space);

// Reference systems.
namespace spaces {

/// {0, 1} with unit cells and counting measure.
SpacePtr two_state();
/// {0, ..., k-1} with unit cells and counting measure.
SpacePtr k_state(std::size_t k);
/// Totals 0..n of n independent two-state units; m(k) = C(n, k).
SpacePtr binomial_units(std::size_t n);
/// Uniform grid of `count` points on [x_min, x_max], Lebesgue measure,
/// trapezoid cell volumes.
SpacePtr uniform_grid(double x_min, double x_max, std::size_t count);
/// |X|^n product space with product measure and cell volumes; points are
/// labelled by their flat index, in which the first factor varies fastest
/// (x_1 = flat % |X|). Throws a resource error when the
/// product would exceed max_points.
SpacePtr product(const SampleSpace& base, int n, std::size_t max_points = 1'000'000);

}  // namespace spaces

namespace observables {

Observable identity(const SpacePtr& space, std::string name = "x");
Observable power(const SpacePtr& space, double exponent, std::string name);
Observable from_function(const SpacePtr& space, const std::function<double(double)>& f,
                         std::string name);
/// a(x_1..x_n) = sum_i a(x_i) on spaces::product(base.space(), n).
Observable product_sum(const Observable& base, const SpacePtr& product_space, int n);

}  // namespace observables

}  // namespace hyperme
