#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "hyperme/error.hpp"
#include "hyperme/kernels.hpp"

using namespace hyperme;
using kernels::Backend;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Sizes straddle the 4-wide vector body and its scalar tail.
const std::vector<std::size_t> kSizes{0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 101, 1000};

std::vector<double> random_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return v;
}

double rel(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!kernels::avx2_available()) GTEST_SKIP() << "AVX2+FMA not available on this CPU";
  }
  const kernels::KernelTable& s = kernels::kernel_table(Backend::kScalar);
  const kernels::KernelTable& v = kernels::avx2_available() ? kernels::kernel_table(Backend::kAvx2) : s;
};

}  // namespace

TEST_F(KernelEquivalence, MaxValueIsExact) {
  for (std::size_t n : kSizes) {
    auto x = random_values(n, -50, 50, n);
    if (n > 2) x[n / 2] = kNegInf;
    EXPECT_EQ(s.max_value(x), v.max_value(x)) << "n=" << n;
  }
}

TEST_F(KernelEquivalence, SumExpShifted) {
  for (std::size_t n : kSizes) {
    auto x = random_values(n, -700, 0, n + 1);
    if (n > 3) x[3] = kNegInf;
    const double shift = n ? s.max_value(x) : 0.0;
    EXPECT_LE(rel(s.sum_exp_shifted(x, shift), v.sum_exp_shifted(x, shift)), 1e-14) << "n=" << n;
  }
}

TEST_F(KernelEquivalence, ExpShiftedElementwise) {
  for (std::size_t n : kSizes) {
    auto x = random_values(n, -745, 700, n + 2);
    if (n > 1) x[1] = kNegInf;
    std::vector<double> a(n), b(n);
    s.exp_shifted(x, 0.0, a);
    v.exp_shifted(x, 0.0, b);
    for (std::size_t k = 0; k < n; ++k) {
      if (a[k] < 1e-300) {
        EXPECT_NEAR(a[k], b[k], 1e-300) << k;
      } else {
        EXPECT_LE(rel(a[k], b[k]), 4e-16) << "x=" << x[k];
      }
    }
  }
}

TEST_F(KernelEquivalence, LogArrayElementwise) {
  for (std::size_t n : kSizes) {
    auto x = random_values(n, 1e-300, 1e300, n + 3);
    for (std::size_t k = 0; k < n; k += 3) x[k] = std::exp(random_values(1, -690, 690, k)[0]);
    if (n > 2) x[2] = 0.0;
    if (n > 4) x[4] = 1.0;
    std::vector<double> a(n), b(n);
    s.log_array(x, a);
    v.log_array(x, b);
    for (std::size_t k = 0; k < n; ++k) {
      if (std::isinf(a[k])) {
        EXPECT_EQ(a[k], b[k]);
      } else {
        EXPECT_LE(std::abs(a[k] - b[k]), 2e-16 * std::max(1.0, std::abs(a[k]))) << "x=" << x[k];
      }
    }
  }
}

TEST_F(KernelEquivalence, Reductions) {
  for (std::size_t n : kSizes) {
    const auto a = random_values(n, 0, 1, n + 4), b = random_values(n, 0, 1, n + 5), c = random_values(n, 0, 1, n + 6);
    EXPECT_LE(rel(s.dot(a, b), v.dot(a, b)), 1e-14) << n;
    EXPECT_LE(rel(s.dot3(a, b, c), v.dot3(a, b, c)), 1e-14) << n;
    std::vector<double> y1 = c, y2 = c;
    s.axpy(-0.37, a, y1);
    v.axpy(-0.37, a, y2);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LE(std::abs(y1[k] - y2[k]), 4.5e-16) << k;  // FMA: one rounding fewer
  }
}

TEST_F(KernelEquivalence, PlogpRatioSkipsZeros) {
  for (std::size_t n : kSizes) {
    auto p = random_values(n, 0, 2, n + 7);
    const auto w = random_values(n, 0.5, 1.5, n + 8);
    auto log_m = random_values(n, -3, 0, n + 9);
    for (std::size_t k = 0; k < n; k += 5) {
      p[k] = 0.0;
      log_m[k] = kNegInf;
    }
    const double a = s.plogp_ratio(w, p, log_m), b = v.plogp_ratio(w, p, log_m);
    EXPECT_FALSE(std::isnan(b));
    EXPECT_LE(std::abs(a - b), 1e-14 * std::max(1.0, std::abs(a))) << n;
  }
}

TEST(Kernels, LogSumExp) {
  const std::vector<double> x{1000.0, 1000.0};
  EXPECT_DOUBLE_EQ(kernels::log_sum_exp(x), 1000.0 + std::log(2.0));
  const std::vector<double> all_neg{kNegInf, kNegInf};
  EXPECT_EQ(kernels::log_sum_exp(all_neg), kNegInf);
  EXPECT_EQ(kernels::log_sum_exp(std::vector<double>{}), kNegInf);
}

TEST(Kernels, BackendSelection) {
  const Backend before = kernels::active_backend();
  kernels::set_backend(Backend::kScalar);
  EXPECT_EQ(kernels::active_backend(), Backend::kScalar);
  if (!kernels::avx2_available()) {
    EXPECT_THROW(kernels::set_backend(Backend::kAvx2), Error);
  }
  kernels::set_backend(before);
  EXPECT_STREQ(kernels::backend_name(Backend::kScalar), "scalar");
}
