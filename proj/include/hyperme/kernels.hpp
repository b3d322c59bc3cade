#pragma once

// Inner-loop kernels over dense per-point arrays.
//
// Two implementations exist: a scalar reference built with the default
// flags and an AVX2+FMA variant compiled in its own translation unit. The
// active backend is chosen once at startup from cpuid and may be forced to
// the scalar path with HYPERME_SIMD=scalar. Both tables stay reachable
// through kernel_table() so tests can compare them directly.

#include <cstddef>
#include <span>

namespace hyperme::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  // max_k x_k; -inf for an empty range.
  double (*max_value)(std::span<const double> x);
  // sum_k exp(x_k - shift); entries equal to -inf contribute zero.
  double (*sum_exp_shifted)(std::span<const double> x, double shift);
  // out_k = exp(x_k - shift).
  void (*exp_shifted)(std::span<const double> x, double shift, std::span<double> out);
  // out_k = log(x_k); log(0) = -inf.
  void (*log_array)(std::span<const double> x, std::span<double> out);
  double (*dot)(std::span<const double> a, std::span<const double> b);
  double (*dot3)(std::span<const double> a, std::span<const double> b,
                 std::span<const double> c);
  // y_k += alpha * x_k.
  void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
  // sum_k w_k p_k (log p_k - log_m_k), skipping p_k == 0. Callers check
  // support (p_k > 0 implies log_m_k finite) beforehand.
  double (*plogp_ratio)(std::span<const double> w, std::span<const double> p,
                        std::span<const double> log_m);
};

bool avx2_available() noexcept;
Backend active_backend() noexcept;
/// Throws hyperme::Error (usage) when the requested backend is not available.
void set_backend(Backend backend);
const char* backend_name(Backend backend) noexcept;
const KernelTable& kernel_table(Backend backend);

/// The table selected for this process.
const KernelTable& active() noexcept;

inline double max_value(std::span<const double> x) { return active().max_value(x); }
inline double sum_exp_shifted(std::span<const double> x, double shift) {
  return active().sum_exp_shifted(x, shift);
}
inline void exp_shifted(std::span<const double> x, double shift, std::span<double> out) {
  active().exp_shifted(x, shift, out);
}
inline void log_array(std::span<const double> x, std::span<double> out) {
  active().log_array(x, out);
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a, b);
}
inline double dot3(std::span<const double> a, std::span<const double> b,
                   std::span<const double> c) {
  return active().dot3(a, b, c);
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x, y);
}
inline double plogp_ratio(std::span<const double> w, std::span<const double> p,
                          std::span<const double> log_m) {
  return active().plogp_ratio(w, p, log_m);
}

/// log(sum_k exp(x_k)) with the max shift; -inf when every entry is -inf.
double log_sum_exp(std::span<const double> x);

}  // namespace hyperme::kernels
