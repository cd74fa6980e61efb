#include "sgrf/relight.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "sgrf/adam.hpp"
#include "sgrf/csv.hpp"
#include "sgrf/error.hpp"

namespace sgrf {

double mean_light_uncertainty(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                              std::span<const Camera> probes, std::span<const double> light,
                              const UncertaintyOptions& options, ShCoeffs* gradient) {
  if (probes.empty()) throw ConfigError("light uncertainty: no probe cameras");
  const double inv = 1.0 / static_cast<double>(probes.size());
  double u = 0.0;
  if (gradient != nullptr) gradient->fill(0.0);
  for (const Camera& cam : probes) {
    UncertaintyGradient g;
    u += inv * render_uncertainty(gen, layout, background, cam, light, options, gradient ? &g : nullptr).total;
    if (gradient != nullptr)
      for (int k = 0; k < kShBasis; ++k) (*gradient)[k] += inv * g.light[k];
  }
  return u;
}

LightSelection select_next_illumination(const ManifoldGenerator& gen, const ParamLayout& layout,
                                        const Vec3& background, std::span<const Camera> probes,
                                        const std::array<bool, kShBasis>& used, const UncertaintyOptions& options) {
  LightSelection sel;
  sel.scores.fill(std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  for (int k = 0; k < kShBasis; ++k) {
    if (used[k]) continue;
    const ShCoeffs light = IlluminationCondition::one_hot(k).coeffs;
    const double u = mean_light_uncertainty(gen, layout, background, probes, light, options);
    sel.scores[k] = u;
    if (!found || u > sel.uncertainty) {
      sel.index = k;
      sel.uncertainty = u;
      found = true;
    }
  }
  if (!found) throw ConfigError("select_next_illumination: all one-hot candidates are used");
  return sel;
}

LightOptimization optimize_next_illumination(const ManifoldGenerator& gen, const ParamLayout& layout,
                                             const Vec3& background, const IlluminationCondition& init,
                                             std::span<const Camera> probes, const LightOptimizationOptions& opt,
                                             const UncertaintyOptions& options) {
  if (opt.steps < 1) throw ConfigError("optimize_next_illumination: steps must be >= 1");
  for (double c : init.coeffs)
    if (!std::isfinite(c)) throw ConfigError("optimize_next_illumination: non-finite initial light");
  if (init.norm() == 0.0) throw ConfigError("optimize_next_illumination: zero initial light");
  IlluminationCondition light = init;
  light.normalize();
  std::vector<double> params(light.coeffs.begin(), light.coeffs.end());
  AdamState adam("light", kShBasis, opt.learning_rate);

  LightOptimization out;
  for (int step = 0;; ++step) {
    ShCoeffs grad{};
    const double u = mean_light_uncertainty(gen, layout, background, probes, light.coeffs, options, &grad);
    out.trajectory.push_back(u);
    if (step == 0) {
      out.initial_uncertainty = u;
      out.uncertainty = u;
      out.light = light;
    } else if (u > out.uncertainty) {
      out.uncertainty = u;
      out.light = light;
      out.best_step = step;
    }
    if (step == opt.steps) break;
    // Tangent-plane gradient. The radial part does nothing on the sphere, but
    // Adam's per-coordinate scaling would turn it into a drift toward sign
    // vectors.
    double radial = 0.0;
    for (int k = 0; k < kShBasis; ++k) radial += grad[k] * light.coeffs[k];
    std::vector<double> g(kShBasis);
    bool nan = false;
    for (int k = 0; k < kShBasis; ++k) {
      g[k] = -(grad[k] - radial * light.coeffs[k]);
      nan = nan || std::isnan(g[k]);
    }
    if (nan) {
      std::cerr << "warning: optimize_next_illumination: NaN gradient at step " << step << ", keeping best so far\n";
      out.stopped_on_nan = true;
      break;
    }
    adam.step(params, g);
    std::copy(params.begin(), params.end(), light.coeffs.begin());
    light.normalize();
    std::copy(light.coeffs.begin(), light.coeffs.end(), params.begin());
  }
  return out;
}

namespace {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

ShCoeffs sh_project(const std::function<double(const Vec3&)>& f) {
  static const auto nodes = [] {
    std::pair<std::vector<double>, std::vector<double>> nw;
    gauss_legendre(16, nw.first, nw.second);
    return nw;
  }();
  const int n_phi = 32;
  ShCoeffs c{};
  for (std::size_t i = 0; i < nodes.first.size(); ++i) {
    const double ct = nodes.first[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / n_phi;
      const Vec3 d(st * std::cos(phi), st * std::sin(phi), ct);
      const double v = f(d) * nodes.second[i] * 2.0 * std::numbers::pi / n_phi;
      const ShBasis y = sh_eval(d);
      for (int k = 0; k < kShBasis; ++k) c[k] += v * y[k];
    }
  }
  return c;
}

ShCoeffs lobe_light(const Vec3& direction, double sharpness, double ambient) {
  const Vec3 d = direction.normalized();
  return sh_project([&](const Vec3& w) { return ambient + std::exp(sharpness * (w.dot(d) - 1.0)); });
}

void write_illumination_library(const std::vector<NamedLight>& lights, const std::filesystem::path& path) {
  std::vector<std::string> header{"name"};
  for (int k = 0; k < kShBasis; ++k) header.push_back("c" + std::to_string(k));
  CsvWriter csv(path, header);
  for (const NamedLight& l : lights) {
    csv.cell(l.name);
    for (double c : l.coeffs) csv.cell(c);
    csv.end_row();
  }
}

std::vector<NamedLight> read_illumination_library(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 1 + static_cast<std::size_t>(kShBasis) || t.header[0] != "name") {
    throw FormatError(path.string() + ": expected columns name,c0..c15");
  }
  std::vector<NamedLight> out;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw FormatError(path.string() + ": ragged row");
    NamedLight l;
    l.name = row[0];
    for (int k = 0; k < kShBasis; ++k) {
      try {
        l.coeffs[k] = std::stod(row[k + 1]);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad number '" + row[k + 1] + "'");
      }
    }
    out.push_back(l);
  }
  return out;
}

}  // namespace sgrf
