#pragma once

#include <array>
#include <vector>

#include "sgrf/linalg.hpp"

namespace sgrf {

/// Pinhole camera on a sphere around `look_at`, parameterized by latitude and
/// longitude (radians) and radius. Camera space: x right, y down, z forward.
struct Camera {
  double latitude = 0.0;
  double longitude = 0.0;
  double radius = 4.0;
  Vec3 look_at = Vec3::Zero();
  Vec3 up_hint = Vec3::UnitZ();
  double focal_length = 80.0;
  int width = 64;
  int height = 64;

  Vec3 direction() const;  ///< unit vector from look_at to the camera
  Vec3 position() const { return look_at + radius * direction(); }
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
};

/// World-to-camera transform and its derivatives with respect to the
/// differentiable pose coordinates (latitude, longitude, radius).
struct CameraFrame {
  Vec3 position;
  Mat3 rotation;  // rows: right, down, forward
  std::array<Vec3, 3> d_position;
  std::array<Mat3, 3> d_rotation;
};

enum PoseCoord { kLatitude = 0, kLongitude = 1, kRadius = 2 };

/// Throws ConfigError for a non-positive radius or empty image.
CameraFrame camera_frame(const Camera& camera);

struct Ray {
  Vec3 origin;
  Vec3 direction;
  double t_near;
  double t_far;
};

/// One ray per pixel through the pixel center, row-major.
std::vector<Ray> generate_rays(const Camera& camera, double t_near = 0.01, double t_far = 100.0);

}  // namespace sgrf
