#include <algorithm>
#include <cmath>

#include "sgrf/simd/kernels.hpp"

namespace sgrf::simd {
namespace {

void footprint_row(const FootprintRow& r, double* out, std::size_t count) {
  const double dy = r.py - r.mean_y;
  for (std::size_t i = 0; i < count; ++i) {
    const double dx = static_cast<double>(r.x0) + static_cast<double>(i) + 0.5 - r.mean_x;
    const double q = r.conic_a * dx * dx + 2.0 * r.conic_b * dx * dy + r.conic_c * dy * dy;
    out[i] = r.opacity * std::exp(-0.5 * q);
  }
}

void signed_relu_axpy(double z, const double* raw, const double* sign, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += z * (sign[i] * std::max(raw[i], 0.0));
}

void signed_relu_axpy_backward(double z, const double* g, const double* raw, const double* sign, double* draw,
                               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] > 0.0) draw[i] += z * (g[i] * sign[i]);
  }
}

double relu_sum(const double* raw, std::size_t n, double grad_scale, double* grad) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] > 0.0) {
      sum += raw[i];
      if (grad) grad[i] += grad_scale;
    }
  }
  return sum;
}

void adam_update(const AdamCoeffs& c, const double* lr, const double* g, double* m, double* v, double* p,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (g[i] * g[i]);
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    p[i] -= lr[i] * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void squared_diff_accumulate(const double* a, const double* b, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{Isa::Scalar,        footprint_row, signed_relu_axpy, signed_relu_axpy_backward,
                         relu_sum,           adam_update,   squared_diff_accumulate};
  return k;
}

}  // namespace sgrf::simd
