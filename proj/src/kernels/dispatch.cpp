#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string_view>

#include "hyperme/error.hpp"
#include "kernels_internal.hpp"

namespace hyperme::kernels {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(HYPERME_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("HYPERME_SIMD")) {
    if (std::string_view(env) == "scalar") return &detail::scalar_table();
  }
#if defined(HYPERME_HAVE_AVX2_TU)
  if (cpu_has_avx2_fma()) return &detail::avx2_table();
#endif
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool avx2_available() noexcept {
  static const bool available = cpu_has_avx2_fma();
  return available;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_relaxed); }

Backend active_backend() noexcept {
  return &active() == &detail::scalar_table() ? Backend::kScalar : Backend::kAvx2;
}

const KernelTable& kernel_table(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return detail::scalar_table();
    case Backend::kAvx2:
#if defined(HYPERME_HAVE_AVX2_TU)
      if (avx2_available()) return detail::avx2_table();
#endif
      break;
  }
  throw Error(ErrorKind::kUsage, "kernels",
              std::string("backend not available on this CPU: ") + backend_name(backend));
}

void set_backend(Backend backend) {
  active_slot().store(&kernel_table(backend), std::memory_order_relaxed);
}

const char* backend_name(Backend backend) noexcept {
  return backend == Backend::kScalar ? "scalar" : "avx2";
}

double log_sum_exp(std::span<const double> x) {
  const double m = max_value(x);
  if (!std::isfinite(m)) return m;
  return m + std::log(sum_exp_shifted(x, m));
}

}  // namespace hyperme::kernels
