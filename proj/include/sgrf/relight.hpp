#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgrf/planner.hpp"
#include "sgrf/prt.hpp"

namespace sgrf {

/// Mean U over the probe cameras under one light; optionally its gradient
/// with respect to the 16 light coefficients.
double mean_light_uncertainty(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                              std::span<const Camera> probes, std::span<const double> light,
                              const UncertaintyOptions& options = {}, ShCoeffs* gradient = nullptr);

struct LightSelection {
  int index = 0;
  double uncertainty = 0.0;
  std::array<double, kShBasis> scores{};  ///< NaN for excluded candidates
};

/// argmax of mean U over the unused one-hot lights (ties to the lowest
/// index). Throws ConfigError when all 16 are used or there are no probes.
LightSelection select_next_illumination(const ManifoldGenerator& gen, const ParamLayout& layout,
                                        const Vec3& background, std::span<const Camera> probes,
                                        const std::array<bool, kShBasis>& used, const UncertaintyOptions& options = {});

struct LightOptimizationOptions {
  int steps = 100;
  double learning_rate = 0.05;
};

struct LightOptimization {
  IlluminationCondition light;  ///< best along the trajectory (unit norm)
  double uncertainty = 0.0;
  double initial_uncertainty = 0.0;
  int best_step = 0;
  bool stopped_on_nan = false;
  std::vector<double> trajectory;  ///< U per step, starting with the init
};

/// Adam ascent of mean probe U over the light, renormalized to unit norm
/// after every step. Throws ConfigError for a non-finite or zero init.
LightOptimization optimize_next_illumination(const ManifoldGenerator& gen, const ParamLayout& layout,
                                             const Vec3& background, const IlluminationCondition& init,
                                             std::span<const Camera> probes, const LightOptimizationOptions& opt = {},
                                             const UncertaintyOptions& options = {});

/// SH projection of a spherical function by product Gauss-Legendre x
/// trapezoid quadrature (exact for band-limited inputs up to band 15).
ShCoeffs sh_project(const std::function<double(const Vec3&)>& f);

/// Non-negative light: `ambient` plus a lobe exp(sharpness (w.d - 1)) around `direction`.
ShCoeffs lobe_light(const Vec3& direction, double sharpness, double ambient);

struct NamedLight {
  std::string name;
  ShCoeffs coeffs{};
};

/// CSV `name,c0,...,c15`.
void write_illumination_library(const std::vector<NamedLight>& lights, const std::filesystem::path& path);
std::vector<NamedLight> read_illumination_library(const std::filesystem::path& path);

}  // namespace sgrf
