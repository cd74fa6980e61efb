#include "sgrf/loss.hpp"

#include "sgrf/error.hpp"

namespace sgrf {

PhotometricLoss photometric_loss(const ImageBuffer& rendered, const ImageBuffer& target, double w,
                                 const SsimParams& params) {
  if (!rendered.same_shape(target)) throw DimensionError("photometric_loss: image dimensions differ");
  if (rendered.data.empty()) throw DimensionError("photometric_loss: empty images");
  const std::size_t n = rendered.data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  PhotometricLoss out;
  out.d_rendered = ImageBuffer(rendered.width, rendered.height);
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = rendered.data[i] - target.data[i];
    l1 += std::abs(d);
    out.d_rendered.data[i] = (1.0 - w) * inv_n * (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0);
  }
  out.value = (1.0 - w) * l1 * inv_n;
  if (w != 0.0) {
    const SsimWithGradient s = ssim_with_gradient(rendered, target, params);
    out.value += w * 0.5 * (1.0 - s.value);
    for (std::size_t i = 0; i < n; ++i) out.d_rendered.data[i] -= 0.5 * w * s.d_a.data[i];
  }
  return out;
}

}  // namespace sgrf
