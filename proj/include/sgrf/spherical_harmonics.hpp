#pragma once

#include <array>

#include "sgrf/linalg.hpp"

namespace sgrf {

/// Number of real SH basis functions in bands 0..3.
inline constexpr int kShBasis = 16;

using ShBasis = std::array<double, kShBasis>;
using ShCoeffs = std::array<double, kShBasis>;

/// Real spherical harmonics Y_l^k for l = 0..3, band-major (index l*l + l + k).
/// Non-unit input is normalized first.
ShBasis sh_eval(const Vec3& direction);

/// Basis values plus their Jacobian with respect to the *unnormalized*
/// direction `v` (the normalization is differentiated through).
struct ShBasisWithGradient {
  ShBasis value;
  std::array<Vec3, kShBasis> d_direction;
};
ShBasisWithGradient sh_eval_with_gradient(const Vec3& v);

}  // namespace sgrf
