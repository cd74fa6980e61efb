#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "sgrf/simd/kernels.hpp"

namespace sgrf::simd {
namespace {

// exp(x) for x in [-708, 708]: Cody-Waite reduction by ln2, degree-13 Taylor
// polynomial on |r| <= ln2/2, exponent reassembled from the rounded quotient.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_clamp = _mm256_set1_pd(-708.0);
  const __m256d hi_clamp = _mm256_set1_pd(708.0);
  x = _mm256_max_pd(_mm256_min_pd(x, hi_clamp), lo_clamp);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double kInvFact[] = {1.0,
                                        1.0,
                                        1.0 / 2,
                                        1.0 / 6,
                                        1.0 / 24,
                                        1.0 / 120,
                                        1.0 / 720,
                                        1.0 / 5040,
                                        1.0 / 40320,
                                        1.0 / 362880,
                                        1.0 / 3628800,
                                        1.0 / 39916800,
                                        1.0 / 479001600,
                                        1.0 / 6227020800.0};
  __m256d p = _mm256_set1_pd(kInvFact[13]);
  for (int k = 12; k >= 0; --k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));

  // 2^n via the mantissa trick: (n + 1023 + 2^52) holds n + 1023 in its low bits.
  const __m256d shifted = _mm256_add_pd(n, _mm256_set1_pd(4503599627370496.0 + 1023.0));
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(shifted), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void footprint_row(const FootprintRow& r, double* out, std::size_t count) {
  const double dy = r.py - r.mean_y;
  const double base = static_cast<double>(r.x0) + 0.5 - r.mean_x;
  const __m256d a = _mm256_set1_pd(r.conic_a);
  const __m256d b2dy = _mm256_set1_pd(2.0 * r.conic_b * dy);
  const __m256d cdy2 = _mm256_set1_pd(r.conic_c * dy * dy);
  const __m256d half_neg = _mm256_set1_pd(-0.5);
  const __m256d opacity = _mm256_set1_pd(r.opacity);
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d dx = _mm256_add_pd(_mm256_set1_pd(base + static_cast<double>(i)), lane);
    // q = a dx^2 + 2 b dx dy + c dy^2
    __m256d q = _mm256_mul_pd(_mm256_mul_pd(a, dx), dx);
    q = _mm256_add_pd(q, _mm256_mul_pd(b2dy, dx));
    q = _mm256_add_pd(q, cdy2);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(opacity, exp_pd(_mm256_mul_pd(half_neg, q))));
  }
  for (; i < count; ++i) {
    const double dx = base + static_cast<double>(i);
    const double q = r.conic_a * dx * dx + 2.0 * r.conic_b * dx * dy + r.conic_c * dy * dy;
    out[i] = r.opacity * std::exp(-0.5 * q);
  }
}

void signed_relu_axpy(double z, const double* raw, const double* sign, double* out, std::size_t n) {
  const __m256d zv = _mm256_set1_pd(z);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d b = _mm256_mul_pd(_mm256_loadu_pd(sign + i), _mm256_max_pd(_mm256_loadu_pd(raw + i), zero));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), _mm256_mul_pd(zv, b)));
  }
  for (; i < n; ++i) out[i] += z * (sign[i] * std::max(raw[i], 0.0));
}

void signed_relu_axpy_backward(double z, const double* g, const double* raw, const double* sign, double* draw,
                               std::size_t n) {
  const __m256d zv = _mm256_set1_pd(z);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(raw + i), zero, _CMP_GT_OQ);
    const __m256d t = _mm256_mul_pd(zv, _mm256_mul_pd(_mm256_loadu_pd(g + i), _mm256_loadu_pd(sign + i)));
    _mm256_storeu_pd(draw + i, _mm256_add_pd(_mm256_loadu_pd(draw + i), _mm256_and_pd(mask, t)));
  }
  for (; i < n; ++i) {
    if (raw[i] > 0.0) draw[i] += z * (g[i] * sign[i]);
  }
}

double relu_sum(const double* raw, std::size_t n, double grad_scale, double* grad) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d gs = _mm256_set1_pd(grad_scale);
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(raw + i);
    acc = _mm256_add_pd(acc, _mm256_max_pd(x, zero));
    if (grad) {
      const __m256d mask = _mm256_cmp_pd(x, zero, _CMP_GT_OQ);
      _mm256_storeu_pd(grad + i, _mm256_add_pd(_mm256_loadu_pd(grad + i), _mm256_and_pd(mask, gs)));
    }
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    if (raw[i] > 0.0) {
      sum += raw[i];
      if (grad) grad[i] += grad_scale;
    }
  }
  return sum;
}

void adam_update(const AdamCoeffs& c, const double* lr, const double* g, double* m, double* v, double* p,
                 std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(c.beta1), ob1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2), ob2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bias1 = _mm256_set1_pd(c.bias1), bias2 = _mm256_set1_pd(c.bias2);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, gv));
    const __m256d vv =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d m_hat = _mm256_div_pd(mv, bias1);
    const __m256d v_hat = _mm256_div_pd(vv, bias2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(_mm256_loadu_pd(lr + i), m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (g[i] * g[i]);
    p[i] -= lr[i] * (m[i] / c.bias1) / (std::sqrt(v[i] / c.bias2) + c.eps);
  }
}

void squared_diff_accumulate(const double* a, const double* b, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(d, d)));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

}  // namespace

const Kernels& avx2_kernel_table() {
  static const Kernels k{Isa::Avx2,          footprint_row, signed_relu_axpy, signed_relu_axpy_backward,
                         relu_sum,           adam_update,   squared_diff_accumulate};
  return k;
}

}  // namespace sgrf::simd
