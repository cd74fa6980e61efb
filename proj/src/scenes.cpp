#include "sgrf/scenes.hpp"

#include <cmath>
#include <numbers>

#include "sgrf/error.hpp"
#include "sgrf/random.hpp"
#include "sgrf/renderer.hpp"

namespace sgrf {

namespace {

constexpr double kY00 = 0.28209479177387814;

Vec3 in_ball(Rng& rng, double radius) {
  for (;;) {
    const Vec3 p(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    if (p.squaredNorm() <= 1.0) return radius * p;
  }
}

Vec4 random_rotation(Rng& rng) {
  Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
  return q.normalized();
}

}  // namespace

std::vector<Camera> fibonacci_cameras(int count, const CameraRig& rig, double phase, double shift) {
  if (count < 1) throw ConfigError("fibonacci_cameras: count must be positive");
  if (rig.resolution < 16) throw ConfigError("camera rig: resolution must be at least 16");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    const double z = rig.max_abs_z * (1.0 - 2.0 * (i + shift) / count);
    Camera c;
    c.latitude = std::asin(z);
    c.longitude = std::remainder(i * golden + phase, 2.0 * std::numbers::pi);
    c.radius = rig.radius;
    c.width = rig.resolution;
    c.height = rig.resolution;
    c.focal_length = rig.focal_scale * rig.resolution;
    cams.push_back(c);
  }
  return cams;
}

GroundTruth generate_scene(std::uint64_t seed, std::size_t n, double extent, AppearanceMode mode,
                           const CameraRig& rig, int pool_count, int test_count) {
  if (n == 0) throw ConfigError("generate_scene: need at least one primitive");
  if (!(extent > 0.0)) throw ConfigError("generate_scene: extent must be positive");
  Rng rng(seed);
  GroundTruth gt;
  gt.scene.mode = mode;
  const double max_log_ratio = 0.5 * std::log(20.0);  // scale ratio^2 <= 20
  for (std::size_t i = 0; i < n; ++i) {
    GaussianPrimitive p;
    p.position = in_ball(rng, extent);
    const double base = std::log(extent) + uniform(rng, std::log(0.05), std::log(0.12));
    for (int k = 0; k < 3; ++k) p.log_scale[k] = base + uniform(rng, 0.0, max_log_ratio);
    p.rotation = random_rotation(rng);
    p.opacity_logit = uniform(rng, 0.5, 3.0);
    p.appearance.assign(appearance_size(mode), 0.0);
    if (mode == AppearanceMode::ShColor) {
      for (int c = 0; c < 3; ++c) {
        p.appearance[c * kShBasis] = uniform(rng, 0.1, 0.9) / kY00;
        for (int k = 1; k < kShBasis; ++k) p.appearance[c * kShBasis + k] = uniform(rng, -0.05, 0.05);
      }
    } else {
      // Diagonal-dominant transfer with weaker higher bands.
      static const double band_weight[4] = {1.0, 0.6, 0.35, 0.2};
      for (int c = 0; c < 3; ++c) {
        const double albedo = uniform(rng, 0.1, 0.9);
        double* t = p.appearance.data() + c * kShBasis * kShBasis;
        for (int row = 0; row < kShBasis; ++row) {
          for (int col = 0; col < kShBasis; ++col) {
            const int band = static_cast<int>(std::sqrt(static_cast<double>(row)));
            const double diag = row == col ? albedo * band_weight[band] / kY00 : 0.0;
            t[row * kShBasis + col] = diag + (row == 0 && col == 0 ? 0.0 : uniform(rng, -0.03, 0.03));
          }
        }
      }
    }
    gt.scene.primitives.push_back(std::move(p));
  }
  gt.pool = fibonacci_cameras(pool_count, rig, 0.0, 0.5);
  gt.test = fibonacci_cameras(test_count, rig, std::numbers::pi * (3.0 - std::sqrt(5.0)) * 0.5 + 1.0, 0.25);
  return gt;
}

Scene random_point_cloud(std::uint64_t seed, std::size_t n, double extent, AppearanceMode mode, double scale) {
  if (n == 0) throw ConfigError("random_point_cloud: need at least one primitive");
  Rng rng(seed);
  Scene s;
  s.mode = mode;
  for (std::size_t i = 0; i < n; ++i) {
    GaussianPrimitive p;
    p.position = in_ball(rng, extent);
    p.log_scale = Vec3::Constant(std::log(scale * extent));
    p.opacity_logit = 0.0;
    p.appearance.assign(appearance_size(mode), 0.0);
    const std::size_t per = appearance_channel_size(mode);
    for (int c = 0; c < 3; ++c) p.appearance[c * per] = 0.5 / kY00;
    s.primitives.push_back(std::move(p));
  }
  return s;
}

std::vector<TrainingView> synthesize_dataset(const Scene& gt, std::span<const Camera> cameras,
                                             std::span<const ShCoeffs> lights) {
  const bool transfer = gt.mode == AppearanceMode::Transfer;
  if (transfer && lights.empty()) throw ConfigError("synthesize_dataset: transfer scenes need lights");
  if (!transfer && !lights.empty()) throw ConfigError("synthesize_dataset: SH color scenes take no lights");
  const FlatScene flat = flatten(gt);
  const SceneView view{flat.theta, flat.layout, gt.background};
  std::vector<TrainingView> out;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    if (!transfer) {
      out.push_back({cameras[c], {}, render(view, cameras[c]).color, "cam" + std::to_string(c)});
      continue;
    }
    for (std::size_t l = 0; l < lights.size(); ++l) {
      std::vector<double> light(lights[l].begin(), lights[l].end());
      ImageBuffer img = render(view, cameras[c], light).color;
      out.push_back({cameras[c], std::move(light), std::move(img),
                     "cam" + std::to_string(c) + "/light" + std::to_string(l)});
    }
  }
  return out;
}

DepthTarget ground_truth_depth(const Scene& gt, const Camera& camera, std::span<const double> light) {
  RenderOutput r = render(gt, camera, light);
  return {std::move(r.depth), std::move(r.alpha)};
}

}  // namespace sgrf
