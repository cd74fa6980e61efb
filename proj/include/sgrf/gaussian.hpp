#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgrf/linalg.hpp"
#include "sgrf/spherical_harmonics.hpp"

namespace sgrf {

enum class AppearanceMode { ShColor, Transfer };

std::string to_string(AppearanceMode mode);
AppearanceMode appearance_mode_from_string(const std::string& s);

/// Coefficients per color channel: 16 SH coefficients, or a 16x16 transfer
/// matrix (row-major, outgoing SH x incident SH).
constexpr std::size_t appearance_channel_size(AppearanceMode mode) {
  return mode == AppearanceMode::ShColor ? kShBasis : kShBasis * kShBasis;
}
constexpr std::size_t appearance_size(AppearanceMode mode) { return 3 * appearance_channel_size(mode); }

/// One anisotropic Gaussian in raw (unconstrained) parameterization.
struct GaussianPrimitive {
  Vec3 position = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rotation{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z), unnormalized
  double opacity_logit = 0.0;
  std::vector<double> appearance;  // channel-major

  bool operator==(const GaussianPrimitive&) const = default;
};

enum class Field { Position, LogScale, Rotation, Opacity, Appearance };
inline constexpr Field kAllFields[] = {Field::Position, Field::LogScale, Field::Rotation, Field::Opacity,
                                       Field::Appearance};
std::string to_string(Field field);

/// Offsets of every field inside the flat parameter vector. Primitives are
/// laid out back to back with a fixed stride; fields in declaration order.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(AppearanceMode mode, std::size_t primitive_count) : mode_(mode), count_(primitive_count) {}

  AppearanceMode mode() const { return mode_; }
  std::size_t primitive_count() const { return count_; }
  std::size_t stride() const { return 11 + appearance_size(mode_); }
  std::size_t dimension() const { return stride() * count_; }

  static constexpr std::size_t field_offset(Field f) {
    switch (f) {
      case Field::Position: return 0;
      case Field::LogScale: return 3;
      case Field::Rotation: return 6;
      case Field::Opacity: return 10;
      case Field::Appearance: return 11;
    }
    return 0;
  }
  std::size_t length(Field f) const;
  std::size_t offset(std::size_t primitive, Field f) const { return primitive * stride() + field_offset(f); }
  std::size_t primitive_of(std::size_t index) const { return index / stride(); }
  Field field_of(std::size_t index) const;
  /// Human-readable name of a flat index, e.g. "prim 3 rotation[1]".
  std::string describe(std::size_t index) const;

  bool operator==(const ParamLayout&) const = default;

 private:
  AppearanceMode mode_ = AppearanceMode::ShColor;
  std::size_t count_ = 0;
};

struct Scene {
  std::vector<GaussianPrimitive> primitives;
  Vec3 background = Vec3::Zero();
  AppearanceMode mode = AppearanceMode::ShColor;

  bool operator==(const Scene&) const = default;
};

struct FlatScene {
  std::vector<double> theta;
  ParamLayout layout;
};

/// Throws ConfigError for an empty scene or a primitive whose appearance
/// block does not match the scene mode.
FlatScene flatten(const Scene& scene);
Scene unflatten(std::span<const double> theta, const ParamLayout& layout, const Vec3& background = Vec3::Zero());

/// Read-only view of a flat parameter vector plus the data needed to render it.
struct SceneView {
  std::span<const double> theta;
  ParamLayout layout;
  Vec3 background = Vec3::Zero();
};

struct ActivatedGaussian {
  Vec3 position;
  Vec3 scale;           // exp(log_scale)
  Vec4 unit_rotation;   // normalized quaternion
  Mat3 rotation;        // R(unit_rotation)
  Mat3 covariance;      // R diag(scale)^2 R^T
  double opacity;       // logistic(opacity_logit)
};

double logistic(double x);
Mat3 quaternion_to_matrix(const Vec4& unit_q);

/// Throws NumericError for a zero quaternion.
ActivatedGaussian activate(const Vec3& position, const Vec3& log_scale, const Vec4& rotation, double opacity_logit);
ActivatedGaussian activate(const GaussianPrimitive& p);
/// Activates primitive `i` straight from the flat vector.
ActivatedGaussian activate(std::span<const double> theta, const ParamLayout& layout, std::size_t i);

}  // namespace sgrf
