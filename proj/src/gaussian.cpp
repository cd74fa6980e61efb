#include "sgrf/gaussian.hpp"

#include <cmath>

#include "sgrf/error.hpp"

namespace sgrf {

std::string to_string(AppearanceMode mode) { return mode == AppearanceMode::ShColor ? "sh" : "transfer"; }

AppearanceMode appearance_mode_from_string(const std::string& s) {
  if (s == "sh") return AppearanceMode::ShColor;
  if (s == "transfer") return AppearanceMode::Transfer;
  throw ConfigError("unknown appearance mode '" + s + "' (expected sh|transfer)");
}

std::string to_string(Field field) {
  switch (field) {
    case Field::Position: return "position";
    case Field::LogScale: return "log_scale";
    case Field::Rotation: return "rotation";
    case Field::Opacity: return "opacity";
    case Field::Appearance: return "appearance";
  }
  return "?";
}

std::size_t ParamLayout::length(Field f) const {
  switch (f) {
    case Field::Position:
    case Field::LogScale: return 3;
    case Field::Rotation: return 4;
    case Field::Opacity: return 1;
    case Field::Appearance: return appearance_size(mode_);
  }
  return 0;
}

Field ParamLayout::field_of(std::size_t index) const {
  const std::size_t local = index % stride();
  if (local < 3) return Field::Position;
  if (local < 6) return Field::LogScale;
  if (local < 10) return Field::Rotation;
  if (local < 11) return Field::Opacity;
  return Field::Appearance;
}

std::string ParamLayout::describe(std::size_t index) const {
  const Field f = field_of(index);
  const std::size_t local = index % stride() - field_offset(f);
  return "prim " + std::to_string(primitive_of(index)) + " " + to_string(f) + "[" + std::to_string(local) + "]";
}

FlatScene flatten(const Scene& scene) {
  if (scene.primitives.empty()) throw ConfigError("flatten: scene has no primitives");
  FlatScene out{{}, ParamLayout(scene.mode, scene.primitives.size())};
  const std::size_t app = appearance_size(scene.mode);
  out.theta.reserve(out.layout.dimension());
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const GaussianPrimitive& p = scene.primitives[i];
    if (p.appearance.size() != app) {
      throw ConfigError("flatten: primitive " + std::to_string(i) + " has " + std::to_string(p.appearance.size()) +
                        " appearance values, mode " + to_string(scene.mode) + " needs " + std::to_string(app));
    }
    for (int k = 0; k < 3; ++k) out.theta.push_back(p.position[k]);
    for (int k = 0; k < 3; ++k) out.theta.push_back(p.log_scale[k]);
    for (int k = 0; k < 4; ++k) out.theta.push_back(p.rotation[k]);
    out.theta.push_back(p.opacity_logit);
    out.theta.insert(out.theta.end(), p.appearance.begin(), p.appearance.end());
  }
  return out;
}

Scene unflatten(std::span<const double> theta, const ParamLayout& layout, const Vec3& background) {
  if (theta.size() != layout.dimension()) {
    throw DimensionError("unflatten: theta has " + std::to_string(theta.size()) + " entries, layout needs " +
                         std::to_string(layout.dimension()));
  }
  Scene scene;
  scene.mode = layout.mode();
  scene.background = background;
  scene.primitives.resize(layout.primitive_count());
  const std::size_t app = appearance_size(layout.mode());
  for (std::size_t i = 0; i < layout.primitive_count(); ++i) {
    const double* b = theta.data() + i * layout.stride();
    GaussianPrimitive& p = scene.primitives[i];
    p.position = Vec3(b[0], b[1], b[2]);
    p.log_scale = Vec3(b[3], b[4], b[5]);
    p.rotation = Vec4(b[6], b[7], b[8], b[9]);
    p.opacity_logit = b[10];
    p.appearance.assign(b + 11, b + 11 + app);
  }
  return scene;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Mat3 quaternion_to_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),    //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

ActivatedGaussian activate(const Vec3& position, const Vec3& log_scale, const Vec4& rotation, double opacity_logit) {
  const double qn = rotation.norm();
  if (!(qn > 0.0)) throw NumericError("activate: zero quaternion (degenerate rotation)");
  ActivatedGaussian g;
  g.position = position;
  g.scale = log_scale.array().exp();
  g.unit_rotation = rotation / qn;
  g.rotation = quaternion_to_matrix(g.unit_rotation);
  const Vec3 s2 = g.scale.array().square();
  g.covariance = g.rotation * s2.asDiagonal() * g.rotation.transpose();
  g.opacity = logistic(opacity_logit);
  return g;
}

ActivatedGaussian activate(const GaussianPrimitive& p) {
  return activate(p.position, p.log_scale, p.rotation, p.opacity_logit);
}

ActivatedGaussian activate(std::span<const double> theta, const ParamLayout& layout, std::size_t i) {
  const double* b = theta.data() + i * layout.stride();
  return activate(Vec3(b[0], b[1], b[2]), Vec3(b[3], b[4], b[5]), Vec4(b[6], b[7], b[8], b[9]), b[10]);
}

}  // namespace sgrf
