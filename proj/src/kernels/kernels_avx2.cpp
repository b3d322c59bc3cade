// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and is only
// entered after the dispatcher has confirmed both features via cpuid.

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "kernels_internal.hpp"

namespace hyperme::kernels::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

// 2^n for integer-valued n in [-1022, 1023], built from the exponent field.
inline __m256d pow2n(__m128i n) {
  __m256i e = _mm256_cvtepi32_epi64(n);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  return _mm256_castsi256_pd(e);
}

// Cephes-style exp: range reduction by ln2 split in two parts, rational
// approximation on [-ln2/2, ln2/2], then scaling by 2^n applied in two
// halves so that subnormal results and the top of the range stay exact.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.782712893384);
  const __m256d lo = _mm256_set1_pd(-745.1332191019412);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);

  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);

  __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, c1, xc);
  r = _mm256_fnmadd_pd(n, c2, r);

  __m256d rr = _mm256_mul_pd(r, r);
  __m256d px = _mm256_fmadd_pd(p0, rr, p1);
  px = _mm256_fmadd_pd(px, rr, p2);
  px = _mm256_mul_pd(px, r);
  __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
  qx = _mm256_fmadd_pd(qx, rr, q2);
  qx = _mm256_fmadd_pd(qx, rr, q3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  __m128i ni = _mm256_cvtpd_epi32(n);
  __m128i n1 = _mm_srai_epi32(ni, 1);
  __m128i n2 = _mm_sub_epi32(ni, n1);
  e = _mm256_mul_pd(e, pow2n(n1));
  e = _mm256_mul_pd(e, pow2n(n2));

  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), under);
  e = _mm256_blendv_pd(e, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  e = _mm256_blendv_pd(e, x, nan_mask);
  return e;
}

// Cephes-style log: x = m 2^e with m in [sqrt(1/2), sqrt(2)), rational
// approximation for log(m), ln2 split in two parts.
inline __m256d log_pd(__m256d x) {
  const __m256d dbl_min = _mm256_set1_pd(std::numeric_limits<double>::min());
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());

  const __m256d is_nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d is_neg = _mm256_cmp_pd(x, zero, _CMP_LT_OQ);
  const __m256d is_zero = _mm256_cmp_pd(x, zero, _CMP_EQ_OQ);
  const __m256d is_inf = _mm256_cmp_pd(x, inf, _CMP_EQ_OQ);

  // Lift subnormals into the normal range.
  const __m256d is_sub = _mm256_andnot_pd(is_zero, _mm256_cmp_pd(x, dbl_min, _CMP_LT_OQ));
  __m256d xs = _mm256_blendv_pd(x, _mm256_mul_pd(x, _mm256_set1_pd(18014398509481984.0)), is_sub);
  __m256d eadj = _mm256_and_pd(is_sub, _mm256_set1_pd(-54.0));

  __m256i bits = _mm256_castpd_si256(xs);
  __m256i ebits = _mm256_and_si256(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(0x7ff));
  // int64 -> double for small values via the 2^52 magic constant.
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(ebits, _mm256_set1_epi64x(0x4330000000000000LL))),
      _mm256_set1_pd(4503599627370496.0));
  e = _mm256_add_pd(_mm256_sub_pd(e, _mm256_set1_pd(1022.0)), eadj);

  __m256i mbits = _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
                                  _mm256_set1_epi64x(0x3fe0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mbits);  // [0.5, 1)

  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, one));
  m = _mm256_sub_pd(_mm256_add_pd(m, _mm256_and_pd(small, m)), one);

  const __m256d p0 = _mm256_set1_pd(1.01875663804580931796e-4);
  const __m256d p1 = _mm256_set1_pd(4.97494994976747001425e-1);
  const __m256d p2 = _mm256_set1_pd(4.70579119878881725854e0);
  const __m256d p3 = _mm256_set1_pd(1.44989225341610930846e1);
  const __m256d p4 = _mm256_set1_pd(1.79368678507819816313e1);
  const __m256d p5 = _mm256_set1_pd(7.70838733755885391666e0);
  const __m256d q0 = _mm256_set1_pd(1.12873587189167450590e1);
  const __m256d q1 = _mm256_set1_pd(4.52279145837532221105e1);
  const __m256d q2 = _mm256_set1_pd(8.29875266912776603211e1);
  const __m256d q3 = _mm256_set1_pd(7.11544750618563894466e1);
  const __m256d q4 = _mm256_set1_pd(2.31251620126765340583e1);

  __m256d z = _mm256_mul_pd(m, m);
  __m256d pp = _mm256_fmadd_pd(p0, m, p1);
  pp = _mm256_fmadd_pd(pp, m, p2);
  pp = _mm256_fmadd_pd(pp, m, p3);
  pp = _mm256_fmadd_pd(pp, m, p4);
  pp = _mm256_fmadd_pd(pp, m, p5);
  __m256d qq = _mm256_add_pd(m, q0);
  qq = _mm256_fmadd_pd(qq, m, q1);
  qq = _mm256_fmadd_pd(qq, m, q2);
  qq = _mm256_fmadd_pd(qq, m, q3);
  qq = _mm256_fmadd_pd(qq, m, q4);

  __m256d y = _mm256_mul_pd(m, _mm256_div_pd(_mm256_mul_pd(z, pp), qq));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d r = _mm256_add_pd(m, y);
  r = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), r);

  r = _mm256_blendv_pd(r, inf, is_inf);
  r = _mm256_blendv_pd(r, _mm256_set1_pd(-std::numeric_limits<double>::infinity()), is_zero);
  r = _mm256_blendv_pd(r, _mm256_set1_pd(std::numeric_limits<double>::quiet_NaN()), is_neg);
  r = _mm256_blendv_pd(r, x, is_nan);
  return r;
}

double max_value(std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t k = 0;
  double m = -std::numeric_limits<double>::infinity();
  if (n >= kLanes) {
    __m256d acc = _mm256_set1_pd(m);
    for (; k + kLanes <= n; k += kLanes) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x.data() + k));
    m = hmax(acc);
  }
  for (; k < n; ++k) {
    if (x[k] > m) m = x[k];
  }
  return m;
}

double sum_exp_shifted(std::span<const double> x, double shift) {
  const std::size_t n = x.size();
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + k), s)));
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += std::exp(x[k] - shift);
  return total;
}

void exp_shifted(std::span<const double> x, double shift, std::span<double> out) {
  const std::size_t n = x.size();
  const __m256d s = _mm256_set1_pd(shift);
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    _mm256_storeu_pd(out.data() + k, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x.data() + k), s)));
  }
  for (; k < n; ++k) out[k] = std::exp(x[k] - shift);
}

void log_array(std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    _mm256_storeu_pd(out.data() + k, log_pd(_mm256_loadu_pd(x.data() + k)));
  }
  for (; k < n; ++k) out[k] = std::log(x[k]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + k), _mm256_loadu_pd(b.data() + k), acc);
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += a[k] * b[k];
  return total;
}

double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a.data() + k), _mm256_loadu_pd(b.data() + k));
    acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c.data() + k), acc);
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += a[k] * b[k] * c[k];
  return total;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    __m256d yv = _mm256_loadu_pd(y.data() + k);
    _mm256_storeu_pd(y.data() + k, _mm256_fmadd_pd(a, _mm256_loadu_pd(x.data() + k), yv));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

double plogp_ratio(std::span<const double> w, std::span<const double> p,
                   std::span<const double> log_m) {
  const std::size_t n = p.size();
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    __m256d pv = _mm256_loadu_pd(p.data() + k);
    __m256d positive = _mm256_cmp_pd(pv, zero, _CMP_GT_OQ);
    // log of a masked-in 1.0 keeps the discarded lanes finite.
    __m256d safe = _mm256_blendv_pd(_mm256_set1_pd(1.0), pv, positive);
    __m256d lm = _mm256_and_pd(_mm256_loadu_pd(log_m.data() + k), positive);
    __m256d term = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(w.data() + k), pv),
                                 _mm256_sub_pd(log_pd(safe), lm));
    acc = _mm256_add_pd(acc, _mm256_and_pd(term, positive));
  }
  double total = hsum(acc);
  for (; k < n; ++k) {
    if (p[k] > 0.0) total += w[k] * p[k] * (std::log(p[k]) - log_m[k]);
  }
  return total;
}

constexpr KernelTable kAvx2{
    &max_value, &sum_exp_shifted, &exp_shifted, &log_array,
    &dot,       &dot3,            &axpy,        &plogp_ratio,
};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace hyperme::kernels::detail
