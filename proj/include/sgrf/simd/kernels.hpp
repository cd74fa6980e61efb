#pragma once

#include <cstddef>
#include <string_view>

namespace sgrf::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// One anisotropic 2D Gaussian footprint evaluated along a pixel row.
/// Pixel i of the span has center (x0 + i + 0.5, py).
struct FootprintRow {
  double conic_a, conic_b, conic_c;  // inverse 2D covariance [[a, b], [b, c]]
  double mean_x, mean_y;
  double opacity;
  double py;
  int x0;
};

/// Bias-corrected Adam constants for one step.
struct AdamCoeffs {
  double beta1, beta2, eps;
  double bias1, bias2;  // 1 - beta^t
};

/// Data-parallel inner loops. Every entry has a scalar reference version;
/// vector variants must agree with it to rounding.
struct Kernels {
  Isa isa;

  /// out[i] = opacity * exp(-q/2), q the conic quadratic form at pixel i.
  void (*footprint_row)(const FootprintRow& row, double* out, std::size_t count);

  /// out += z * sign (.) max(raw, 0)
  void (*signed_relu_axpy)(double z, const double* raw, const double* sign, double* out, std::size_t n);

  /// draw += z * g (.) sign (.) [raw > 0]
  void (*signed_relu_axpy_backward)(double z, const double* g, const double* raw, const double* sign, double* draw,
                                    std::size_t n);

  /// Returns sum(max(raw, 0)); when grad is non-null adds grad_scale * [raw > 0].
  double (*relu_sum)(const double* raw, std::size_t n, double grad_scale, double* grad);

  /// Adam update with per-element learning rates.
  void (*adam_update)(const AdamCoeffs& c, const double* lr, const double* g, double* m, double* v, double* p,
                      std::size_t n);

  /// acc += (a - b)^2
  void (*squared_diff_accumulate)(const double* a, const double* b, double* acc, std::size_t n);
};

const Kernels& scalar_kernels();

/// Null when the build or the host CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

/// Kernels used by the library. Chosen once: the best ISA the CPU supports,
/// overridable with the environment variable SGRF_SIMD=scalar|avx2.
const Kernels& active();

/// Force a kernel set (for benchmarks and equivalence tests). Throws
/// ConfigError if the ISA is unavailable.
void set_active(Isa isa);

}  // namespace sgrf::simd
