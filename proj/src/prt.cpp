#include "sgrf/prt.hpp"

#include <cmath>
#include <string>

#include "sgrf/error.hpp"

namespace sgrf {

IlluminationCondition IlluminationCondition::dc_only() { return one_hot(0); }

IlluminationCondition IlluminationCondition::one_hot(int index) {
  if (index < 0 || index >= kShBasis) throw ConfigError("one-hot light index out of range: " + std::to_string(index));
  IlluminationCondition l;
  l.coeffs[static_cast<std::size_t>(index)] = 1.0;
  return l;
}

double IlluminationCondition::norm() const {
  double s = 0.0;
  for (double c : coeffs) s += c * c;
  return std::sqrt(s);
}

void IlluminationCondition::normalize() {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("illumination: cannot normalize a zero/non-finite vector");
  for (double& c : coeffs) c /= n;
}

Vec3 shade_unclamped(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis) {
  constexpr std::size_t n = kShBasis;
  Vec3 out;
  for (int ch = 0; ch < 3; ++ch) {
    const double* t = transfer.data() + static_cast<std::size_t>(ch) * n * n;
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double o = 0.0;
      for (std::size_t c = 0; c < n; ++c) o += t[r * n + c] * light[c];
      acc += o * basis[r];
    }
    out[ch] = acc;
  }
  return out;
}

Vec3 shade(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis) {
  return shade_unclamped(transfer, light, basis).cwiseMax(0.0);
}

Vec3 shade(std::span<const double> transfer, std::span<const double> light, const Vec3& view_direction) {
  return shade(transfer, light, sh_eval(view_direction.normalized()));
}

ShadeGradient shade_backward(std::span<const double> transfer, std::span<const double> light, const ShBasis& basis,
                             const Vec3& d_radiance) {
  constexpr std::size_t n = kShBasis;
  ShadeGradient g;
  const Vec3 raw = shade_unclamped(transfer, light, basis);
  for (int ch = 0; ch < 3; ++ch) {
    if (!(raw[ch] > 0.0) || d_radiance[ch] == 0.0) continue;
    const double gc = d_radiance[ch];
    const double* t = transfer.data() + static_cast<std::size_t>(ch) * n * n;
    double* dt = g.d_transfer.data() + static_cast<std::size_t>(ch) * n * n;
    for (std::size_t r = 0; r < n; ++r) {
      const double wr = gc * basis[r];
      double o = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        dt[r * n + c] += wr * light[c];
        g.d_light[c] += wr * t[r * n + c];
        o += t[r * n + c] * light[c];
      }
      g.d_basis[r] += gc * o;
    }
  }
  return g;
}

}  // namespace sgrf
