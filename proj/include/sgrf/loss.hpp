#pragma once

#include "sgrf/image.hpp"
#include "sgrf/metrics.hpp"

namespace sgrf {

struct PhotometricLoss {
  double value = 0.0;
  ImageBuffer d_rendered;
};

/// (1 - w) mean|rendered - target| + w (1 - SSIM) / 2, with its exact
/// gradient (the L1 subgradient is 0 where the images agree).
PhotometricLoss photometric_loss(const ImageBuffer& rendered, const ImageBuffer& target, double ssim_weight = 0.2,
                                 const SsimParams& params = {});

}  // namespace sgrf
