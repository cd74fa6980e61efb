#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgrf/camera.hpp"
#include "sgrf/gaussian.hpp"
#include "sgrf/prt.hpp"
#include "sgrf/trainer.hpp"

namespace sgrf {

/// Camera placement shared by pools, test sets and landscapes.
struct CameraRig {
  int resolution = 64;
  double radius = 4.0;
  double focal_scale = 1.2;  ///< focal length in units of the image width
  double max_abs_z = 0.9;    ///< keeps Fibonacci points away from the poles
};

/// `count` cameras on a Fibonacci sphere looking at the origin. `phase`
/// rotates the spiral in longitude and `shift` moves the height samples by a
/// fraction of a slot, so a second call with other values interleaves.
std::vector<Camera> fibonacci_cameras(int count, const CameraRig& rig, double phase = 0.0, double shift = 0.5);

struct GroundTruth {
  Scene scene;
  std::vector<Camera> pool;
  std::vector<Camera> test;
};

/// Random ground-truth scene inside a ball of radius `extent`: anisotropy of
/// every covariance bounded by condition number 20, colors (or transfer
/// responses under the DC light) in [0.1, 0.9]. Pool and test cameras come
/// from interleaved Fibonacci spirals. Throws ConfigError for n = 0.
GroundTruth generate_scene(std::uint64_t seed, std::size_t primitives, double extent, AppearanceMode mode,
                           const CameraRig& rig, int pool_count, int test_count);

/// Fitting initialization: a random point cloud, uniform in the ball, with
/// isotropic scale `scale`, opacity 0.5 and gray appearance (DC only).
Scene random_point_cloud(std::uint64_t seed, std::size_t primitives, double extent, AppearanceMode mode,
                         double scale = 0.08);

/// Ground-truth renders for every (camera, light) pair, camera-major. `lights`
/// must be empty for SH color scenes and non-empty for transfer scenes.
std::vector<TrainingView> synthesize_dataset(const Scene& gt, std::span<const Camera> cameras,
                                             std::span<const ShCoeffs> lights = {});

/// Ground-truth depth and coverage for AUSE.
struct DepthTarget {
  std::vector<double> depth;
  std::vector<double> alpha;
};
DepthTarget ground_truth_depth(const Scene& gt, const Camera& camera, std::span<const double> light = {});

}  // namespace sgrf
