#pragma once

#include <array>
#include <span>

#include "sgrf/linalg.hpp"
#include "sgrf/spherical_harmonics.hpp"

namespace sgrf {

/// Distant SH lighting. When `unit_energy` is set the coefficient vector is
/// kept at unit L2 norm.
struct IlluminationCondition {
  ShCoeffs coeffs{};
  bool unit_energy = true;

  static IlluminationCondition dc_only();
  static IlluminationCondition one_hot(int index);
  /// Rescales to unit norm; throws NumericError for a zero vector.
  void normalize();
  double norm() const;
};

/// Per-channel transfer: outgoing SH o = T pi, radiance = max(0, <o, Y(v)>).
/// `transfer` holds 3 row-major 16x16 matrices back to back.
Vec3 shade(std::span<const double> transfer, std::span<const double> light, const Vec3& view_direction);
Vec3 shade(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis);

struct ShadeGradient {
  std::array<double, 3 * kShBasis * kShBasis> d_transfer{};
  ShCoeffs d_light{};
  ShBasis d_basis{};  ///< gradient w.r.t. the evaluated view basis
};

/// Exact reverse-mode derivative through the clamp; clamped channels
/// contribute nothing.
ShadeGradient shade_backward(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis,
                             const Vec3& d_radiance);

/// Raw (pre-clamp) per-channel radiance; used by the renderer.
Vec3 shade_unclamped(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis);

}  // namespace sgrf
