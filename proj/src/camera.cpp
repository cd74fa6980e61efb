#include "sgrf/camera.hpp"

#include <cmath>

#include "sgrf/error.hpp"

namespace sgrf {

Vec3 Camera::direction() const {
  const double cl = std::cos(latitude), sl = std::sin(latitude);
  return Vec3(cl * std::cos(longitude), cl * std::sin(longitude), sl);
}

CameraFrame camera_frame(const Camera& cam) {
  if (!(cam.radius > 0.0)) throw ConfigError("camera radius must be positive");
  if (cam.width <= 0 || cam.height <= 0 || !(cam.focal_length > 0.0)) {
    throw ConfigError("camera intrinsics must be positive");
  }
  const double cl = std::cos(cam.latitude), sl = std::sin(cam.latitude);
  const double co = std::cos(cam.longitude), so = std::sin(cam.longitude);
  const Vec3 u(cl * co, cl * so, sl);
  const std::array<Vec3, 2> du = {Vec3(-sl * co, -sl * so, cl), Vec3(-cl * so, cl * co, 0.0)};

  CameraFrame frame;
  frame.position = cam.look_at + cam.radius * u;
  frame.d_position = {cam.radius * du[0], cam.radius * du[1], u};

  const Vec3 f = -u;
  Vec3 up = cam.up_hint;
  Vec3 v = f.cross(up);
  if (v.norm() < 1e-9) {
    // Looking along the up hint: fall back to the world axis least aligned with f.
    Eigen::Index axis = 0;
    f.cwiseAbs().minCoeff(&axis);
    up = Vec3::Unit(axis);
    v = f.cross(up);
  }
  const double vn = v.norm();
  const Vec3 right = v / vn;
  const Vec3 down = f.cross(right);
  frame.rotation.row(0) = right.transpose();
  frame.rotation.row(1) = down.transpose();
  frame.rotation.row(2) = f.transpose();

  for (int k = 0; k < 2; ++k) {
    const Vec3 df = -du[k];
    const Vec3 dv = df.cross(up);
    const Vec3 dright = (dv - right * right.dot(dv)) / vn;
    const Vec3 ddown = df.cross(right) + f.cross(dright);
    frame.d_rotation[k].row(0) = dright.transpose();
    frame.d_rotation[k].row(1) = ddown.transpose();
    frame.d_rotation[k].row(2) = df.transpose();
  }
  frame.d_rotation[kRadius] = Mat3::Zero();
  return frame;
}

std::vector<Ray> generate_rays(const Camera& cam, double t_near, double t_far) {
  if (!(t_near < t_far)) throw ConfigError("generate_rays: t_near must be below t_far");
  const CameraFrame frame = camera_frame(cam);
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 local((x + 0.5 - cam.cx()) / cam.focal_length, (y + 0.5 - cam.cy()) / cam.focal_length, 1.0);
      rays.push_back({frame.position, (frame.rotation.transpose() * local).normalized(), t_near, t_far});
    }
  }
  return rays;
}

}  // namespace sgrf
