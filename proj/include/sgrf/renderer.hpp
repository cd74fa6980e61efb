#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sgrf/camera.hpp"
#include "sgrf/gaussian.hpp"
#include "sgrf/image.hpp"
#include "sgrf/spherical_harmonics.hpp"

namespace sgrf {

struct RenderSettings {
  double alpha_max = 0.99;
  double alpha_min = 1.0 / 255.0;
  double dilation = 0.3;  ///< added to the 2D covariance diagonal, pixels^2
  double near_plane = 0.2;
  double max_condition = 1e12;
};

struct ProjectedGaussian {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Zero();  ///< includes the dilation
  double depth = 0.0;
  bool valid = false;
};

/// EWA projection: perspective mean and J W Sigma W^T J^T + dilation.
ProjectedGaussian project_gaussian(const ActivatedGaussian& g, const Camera& camera, const RenderSettings& settings = {});

/// One composited contribution to a pixel, front to back.
struct BlendRecord {
  std::uint32_t primitive;
  std::uint32_t clamped;    ///< alpha hit alpha_max
  double alpha;
  double transmittance;     ///< product of (1 - alpha) over earlier records
};

/// Per-primitive projection cache reused by the backward pass.
struct Splat {
  bool valid = false;
  Vec2 mean = Vec2::Zero();
  double conic_a = 0, conic_b = 0, conic_c = 0;
  double opacity = 0;
  double depth = 0;
  Vec3 color = Vec3::Zero();
  Vec3 raw_color = Vec3::Zero();  ///< before the max(0, .) clamp
  int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

struct RenderDiagnostics {
  std::size_t visible = 0;
  std::size_t behind_camera = 0;
  std::size_t ill_conditioned = 0;
  std::size_t contributions = 0;
};

struct RenderOutput {
  ImageBuffer color;
  std::vector<double> alpha;  ///< accumulated opacity per pixel
  std::vector<double> depth;  ///< alpha-normalized expected depth, 0 where alpha == 0
  std::vector<std::uint32_t> record_offset;  ///< pixel p owns records [offset[p], offset[p+1])
  std::vector<BlendRecord> records;
  std::vector<Splat> splats;
  RenderDiagnostics diagnostics;

  bool has_blend_records() const { return !record_offset.empty(); }
};

/// `light` is required (16 coefficients) in transfer mode and ignored for SH
/// color. Throws ConfigError for an empty scene or a missing light.
RenderOutput render(const SceneView& scene, const Camera& camera, std::span<const double> light = {},
                    const RenderSettings& settings = {});
RenderOutput render(const Scene& scene, const Camera& camera, std::span<const double> light = {},
                    const RenderSettings& settings = {});

struct RenderGradients {
  std::vector<double> theta;             ///< d loss / d raw parameters
  std::array<double, 3> camera{};        ///< latitude, longitude, radius
  std::array<double, kShBasis> light{};  ///< zero in SH color mode
};

/// Reverse-mode derivatives of a forward pass given d loss / d color.
/// Throws ConfigError if `forward` carries no blend records.
RenderGradients render_backward(const SceneView& scene, const Camera& camera, std::span<const double> light,
                                const RenderOutput& forward, const ImageBuffer& d_color,
                                const RenderSettings& settings = {});

}  // namespace sgrf
