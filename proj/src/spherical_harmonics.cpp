#include "sgrf/spherical_harmonics.hpp"

#include <cassert>
#include <cmath>

namespace sgrf {
namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

ShBasis eval_unit(double x, double y, double z) {
  const double xx = x * x, yy = y * y, zz = z * z;
  ShBasis b;
  b[0] = kC0;
  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  b[4] = kC2[0] * x * y;
  b[5] = kC2[1] * y * z;
  b[6] = kC2[2] * (2.0 * zz - xx - yy);
  b[7] = kC2[3] * x * z;
  b[8] = kC2[4] * (xx - yy);
  b[9] = kC3[0] * y * (3.0 * xx - yy);
  b[10] = kC3[1] * x * y * z;
  b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3.0 * yy);
  return b;
}

// Partial derivatives of the polynomial forms above w.r.t. (x, y, z).
std::array<Vec3, kShBasis> eval_unit_partials(double x, double y, double z) {
  const double xx = x * x, yy = y * y, zz = z * z;
  std::array<Vec3, kShBasis> g;
  g[0] = Vec3::Zero();
  g[1] = Vec3(0, -kC1, 0);
  g[2] = Vec3(0, 0, kC1);
  g[3] = Vec3(-kC1, 0, 0);
  g[4] = kC2[0] * Vec3(y, x, 0);
  g[5] = kC2[1] * Vec3(0, z, y);
  g[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
  g[7] = kC2[3] * Vec3(z, 0, x);
  g[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0);
  g[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0);
  g[10] = kC3[1] * Vec3(y * z, x * z, x * y);
  g[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
  g[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  g[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
  g[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
  g[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0);
  return g;
}

}  // namespace

ShBasis sh_eval(const Vec3& direction) {
  const double n = direction.norm();
  assert(std::abs(n - 1.0) < 1e-6 && "sh_eval expects a unit direction");
  const Vec3 d = direction / n;
  return eval_unit(d.x(), d.y(), d.z());
}

ShBasisWithGradient sh_eval_with_gradient(const Vec3& v) {
  const double n = v.norm();
  const Vec3 d = v / n;
  ShBasisWithGradient out;
  out.value = eval_unit(d.x(), d.y(), d.z());
  const auto partials = eval_unit_partials(d.x(), d.y(), d.z());
  // d(v/|v|)/dv = (I - d d^T) / |v|
  for (int k = 0; k < kShBasis; ++k) {
    const Vec3& p = partials[k];
    out.d_direction[k] = (p - d * d.dot(p)) / n;
  }
  return out;
}

}  // namespace sgrf
