#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sgrf/spherical_harmonics.hpp"

using namespace sgrf;

// Gauss-Legendre in cos(theta) x uniform in phi integrates products of
// band <= 3 harmonics exactly.
TEST(SphericalHarmonics, OrthonormalUnderQuadrature) {
  const double nodes[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                          0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  const double weights[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const int n_phi = 16;
  double gram[kShBasis][kShBasis] = {};
  for (int i = 0; i < 8; ++i) {
    const double ct = nodes[i], st = std::sqrt(1.0 - ct * ct);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / n_phi;
      const ShBasis y = sh_eval(Vec3(st * std::cos(phi), st * std::sin(phi), ct));
      const double w = weights[i] * 2.0 * std::numbers::pi / n_phi;
      for (int a = 0; a < kShBasis; ++a)
        for (int b = 0; b < kShBasis; ++b) gram[a][b] += w * y[a] * y[b];
    }
  }
  for (int a = 0; a < kShBasis; ++a)
    for (int b = 0; b < kShBasis; ++b) EXPECT_NEAR(gram[a][b], a == b ? 1.0 : 0.0, 1e-12) << a << "," << b;
}

TEST(SphericalHarmonics, ConstantBand) {
  const ShBasis y = sh_eval(Vec3(0.3, -0.2, 0.9).normalized());
  EXPECT_NEAR(y[0], 0.5 / std::sqrt(std::numbers::pi), 1e-15);
}

TEST(SphericalHarmonics, ParityOfBands) {
  const Vec3 d = Vec3(0.4, -0.7, 0.2).normalized();
  const ShBasis a = sh_eval(d), b = sh_eval(-d);
  for (int l = 0; l <= 3; ++l)
    for (int k = l * l; k < (l + 1) * (l + 1); ++k) EXPECT_NEAR(b[k], (l % 2 ? -1.0 : 1.0) * a[k], 1e-14);
}

TEST(SphericalHarmonics, GradientMatchesFiniteDifference) {
  const Vec3 v(0.7, -1.1, 0.4);  // deliberately not unit length
  const ShBasisWithGradient g = sh_eval_with_gradient(v);
  const ShBasis ref = sh_eval(v.normalized());
  for (int k = 0; k < kShBasis; ++k) EXPECT_NEAR(g.value[k], ref[k], 1e-15);
  const double h = 1e-6;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 vp = v, vm = v;
    vp[axis] += h;
    vm[axis] -= h;
    const ShBasis yp = sh_eval(vp.normalized()), ym = sh_eval(vm.normalized());
    for (int k = 0; k < kShBasis; ++k) EXPECT_NEAR(g.d_direction[k][axis], (yp[k] - ym[k]) / (2 * h), 1e-8);
  }
}
