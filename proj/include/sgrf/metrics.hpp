#pragma once

#include <span>
#include <vector>

#include "sgrf/image.hpp"

namespace sgrf {

/// PSNR over all RGB channels jointly, after clamping both images to [0,1].
/// Identical (post-clamp) images give +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM over valid window positions and the three channels.
/// Images smaller than the window use global per-channel statistics.
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});

/// SSIM together with its exact gradient with respect to `a`.
struct SsimWithGradient {
  double value = 0.0;
  ImageBuffer d_a;
};
SsimWithGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});

/// Sparsification analysis. Curves hold the mean remaining error (normalized
/// by the full-set mean) after removing floor(k N / steps) pixels, k = 0..steps-1.
struct AuseResult {
  double score = 0.0;     ///< area / max_area, in [0, 1]
  double area = 0.0;      ///< area between uncertainty-ordered and oracle curves
  double max_area = 0.0;  ///< area for the anti-oracle (ascending error) ordering
  std::vector<double> sparsification;
  std::vector<double> oracle;
};

/// Pixels are removed in decreasing uncertainty order (ties: lower index
/// first). All-zero errors give a zero result.
AuseResult ause(std::span<const double> per_pixel_error, std::span<const double> per_pixel_uncertainty,
                int steps = 100);

}  // namespace sgrf
