#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

namespace hyperme::kernels::detail {
namespace {

double max_value(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) {
    if (v > m) m = v;
  }
  return m;
}

double sum_exp_shifted(std::span<const double> x, double shift) {
  double s = 0.0;
  for (double v : x) s += std::exp(v - shift);
  return s;
}

void exp_shifted(std::span<const double> x, double shift, std::span<double> out) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::exp(x[k] - shift);
}

void log_array(std::span<const double> x, std::span<double> out) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::log(x[k]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k] * c[k];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

double plogp_ratio(std::span<const double> w, std::span<const double> p,
                   std::span<const double> log_m) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) s += w[k] * p[k] * (std::log(p[k]) - log_m[k]);
  }
  return s;
}

constexpr KernelTable kScalar{
    &max_value, &sum_exp_shifted, &exp_shifted, &log_array,
    &dot,       &dot3,            &axpy,        &plogp_ratio,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace hyperme::kernels::detail
