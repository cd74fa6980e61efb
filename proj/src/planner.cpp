#include "sgrf/planner.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "sgrf/adam.hpp"
#include "sgrf/csv.hpp"
#include "sgrf/error.hpp"
#include "sgrf/simd/kernels.hpp"

namespace sgrf {

UncertaintyEstimate render_uncertainty(const ManifoldGenerator& gen, const ParamLayout& layout,
                                       const Vec3& background, const Camera& camera, std::span<const double> light,
                                       const UncertaintyOptions& options, UncertaintyGradient* gradient) {
  const int m = options.samples;
  if (m < 2) throw ConfigError("render_uncertainty: need at least 2 samples, got " + std::to_string(m));
  const LatentSequence latent(gen.latent_dim(), options.latent_seed);
  const std::size_t pixels = static_cast<std::size_t>(camera.width) * camera.height;

  UncertaintyEstimate est;
  est.samples = m;
  std::vector<std::vector<double>> thetas(m);
  std::vector<RenderOutput> renders;
  renders.reserve(m);
  for (int j = 0; j < m; ++j) {
    est.z.push_back(latent.point(options.first_cursor + static_cast<std::uint64_t>(j)));
    thetas[j] = gen.sample(est.z.back());
    renders.push_back(render(SceneView{thetas[j], layout, background}, camera, light, options.render));
  }

  const double inv_m = 1.0 / m;
  est.mean_color = ImageBuffer(camera.width, camera.height);
  est.mean_depth.assign(pixels, 0.0);
  for (const RenderOutput& r : renders) {
    for (std::size_t i = 0; i < r.color.data.size(); ++i) est.mean_color.data[i] += inv_m * r.color.data[i];
    for (std::size_t p = 0; p < pixels; ++p) est.mean_depth[p] += inv_m * r.depth[p];
  }

  const auto& k = simd::active();
  std::vector<double> channel_sq(3 * pixels, 0.0);
  est.depth_variance.assign(pixels, 0.0);
  for (const RenderOutput& r : renders) {
    k.squared_diff_accumulate(r.color.data.data(), est.mean_color.data.data(), channel_sq.data(), channel_sq.size());
    k.squared_diff_accumulate(r.depth.data(), est.mean_depth.data(), est.depth_variance.data(), pixels);
  }
  est.variance.assign(pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    est.variance[p] = inv_m * (channel_sq[3 * p] + channel_sq[3 * p + 1] + channel_sq[3 * p + 2]);
    est.depth_variance[p] *= inv_m;
    est.total += est.variance[p];
  }

  if (gradient != nullptr) {
    *gradient = UncertaintyGradient{};
    // dU/dC_j = (2/M)(C_j - mean); the mean's own dependence cancels.
    ImageBuffer d_color(camera.width, camera.height);
    for (int j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < d_color.data.size(); ++i) {
        d_color.data[i] = 2.0 * inv_m * (renders[j].color.data[i] - est.mean_color.data[i]);
      }
      const RenderGradients g =
          render_backward(SceneView{thetas[j], layout, background}, camera, light, renders[j], d_color, options.render);
      for (int c = 0; c < 3; ++c) gradient->camera[c] += g.camera[c];
      for (int c = 0; c < kShBasis; ++c) gradient->light[c] += g.light[c];
    }
  }
  return est;
}

bool CandidatePool::has_unchosen() const {
  for (bool c : chosen)
    if (!c) return true;
  return false;
}

void CandidatePool::choose(std::size_t index) {
  if (index >= cameras.size()) throw ConfigError("pool: candidate index out of range");
  if (chosen[index]) throw ConfigError("pool: candidate " + std::to_string(index) + " already chosen");
  chosen[index] = true;
}

ViewSelection select_next_view(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                               CandidatePool& pool, std::span<const double> light, const UncertaintyOptions& options) {
  if (!pool.has_unchosen()) throw ConfigError("select_next_view: no unchosen candidates");
  ViewSelection sel;
  sel.scores.assign(pool.size(), std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.chosen[i]) continue;
    const double u = render_uncertainty(gen, layout, background, pool.cameras[i], light, options).total;
    sel.scores[i] = u;
    if (!found || u > sel.uncertainty) {
      sel.index = i;
      sel.uncertainty = u;
      found = true;
    }
  }
  pool.choose(sel.index);
  return sel;
}

ViewOptimization optimize_next_view(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                                    const Camera& init, std::span<const double> light,
                                    const ViewOptimizationOptions& opt, const UncertaintyOptions& options) {
  if (opt.steps < 1) throw ConfigError("optimize_next_view: steps must be >= 1");
  const std::size_t n = opt.optimize_radius ? 3 : 2;
  AdamState adam("camera", n, opt.learning_rate);
  std::vector<double> params{init.latitude, init.longitude, init.radius};
  params.resize(n);

  ViewOptimization out;
  Camera cam = init;
  for (int step = 0;; ++step) {
    UncertaintyGradient g;
    const double u = render_uncertainty(gen, layout, background, cam, light, options, &g).total;
    out.trajectory.push_back({step, cam, u});
    if (step == 0) {
      out.initial_uncertainty = u;
      out.camera = cam;
      out.uncertainty = u;
    } else if (u > out.uncertainty) {
      out.camera = cam;
      out.uncertainty = u;
      out.best_step = step;
    }
    if (step == opt.steps) break;
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) grad[i] = -g.camera[i];  // ascent
    bool nan = false;
    for (double v : grad) nan = nan || std::isnan(v);
    if (nan) {
      std::cerr << "warning: optimize_next_view: NaN gradient at step " << step << ", keeping best so far\n";
      out.stopped_on_nan = true;
      break;
    }
    adam.step(params, grad);
    params[0] = std::clamp(params[0], -opt.max_latitude, opt.max_latitude);
    if (n == 3) params[2] = std::max(params[2], opt.min_radius);
    cam.latitude = params[0];
    cam.longitude = std::remainder(params[1], 2.0 * std::numbers::pi);
    params[1] = cam.longitude;
    if (n == 3) cam.radius = params[2];
  }
  return out;
}

std::size_t farthest_point_select(const CandidatePool& pool, std::span<const Vec3> extra) {
  std::vector<Vec3> chosen(extra.begin(), extra.end());
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool.chosen[i]) chosen.push_back(pool.cameras[i].position());
  if (chosen.empty()) throw ConfigError("farthest_point_select: no chosen camera");
  if (!pool.has_unchosen()) throw ConfigError("farthest_point_select: no unchosen candidates");
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.chosen[i]) continue;
    const Vec3 p = pool.cameras[i].position();
    double d = std::numeric_limits<double>::infinity();
    for (const Vec3& c : chosen) d = std::min(d, (p - c).norm());
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Landscape uncertainty_landscape(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                                const Camera& base, std::span<const double> light, int lat_cells, int lon_cells,
                                double max_latitude, const UncertaintyOptions& options) {
  if (lat_cells < 8 || lon_cells < 16) throw ConfigError("uncertainty_landscape: grid must be at least 8 x 16");
  Landscape l;
  l.lat_cells = lat_cells;
  l.lon_cells = lon_cells;
  for (int r = 0; r < lat_cells; ++r) l.latitude.push_back(-max_latitude + (r + 0.5) * 2.0 * max_latitude / lat_cells);
  for (int c = 0; c < lon_cells; ++c) l.longitude.push_back(-std::numbers::pi + (c + 0.5) * 2.0 * std::numbers::pi / lon_cells);
  l.values.reserve(static_cast<std::size_t>(lat_cells) * lon_cells);
  for (int r = 0; r < lat_cells; ++r) {
    for (int c = 0; c < lon_cells; ++c) {
      Camera cam = base;
      cam.latitude = l.latitude[r];
      cam.longitude = l.longitude[c];
      l.values.push_back(render_uncertainty(gen, layout, background, cam, light, options).total);
    }
  }
  return l;
}

double landscape_roughness(const Landscape& l) {
  double sum = 0.0, diff = 0.0;
  std::size_t pairs = 0;
  auto at = [&](int r, int c) { return l.values[static_cast<std::size_t>(r) * l.lon_cells + c]; };
  for (int r = 0; r < l.lat_cells; ++r) {
    for (int c = 0; c < l.lon_cells; ++c) {
      sum += at(r, c);
      diff += std::abs(at(r, c) - at(r, (c + 1) % l.lon_cells));
      ++pairs;
      if (r + 1 < l.lat_cells) {
        diff += std::abs(at(r, c) - at(r + 1, c));
        ++pairs;
      }
    }
  }
  const double mean = sum / static_cast<double>(l.values.size());
  if (mean == 0.0) return 0.0;
  return diff / static_cast<double>(pairs) / mean;
}

void write_landscape_csv(const Landscape& l, const std::filesystem::path& path) {
  CsvWriter csv(path, {"lat", "lon", "U"});
  for (int r = 0; r < l.lat_cells; ++r) {
    for (int c = 0; c < l.lon_cells; ++c) {
      csv.cell(l.latitude[r]).cell(l.longitude[c]).cell(l.values[static_cast<std::size_t>(r) * l.lon_cells + c]);
      csv.end_row();
    }
  }
}

Vec3 landscape_colormap(double t) {
  static const Vec3 stops[] = {Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 1), Vec3(1, 1, 0), Vec3(1, 1, 1)};
  t = std::clamp(std::isnan(t) ? 0.0 : t, 0.0, 1.0);
  const double x = t * 4.0;
  const int i = std::min(3, static_cast<int>(x));
  const double f = x - i;
  return (1.0 - f) * stops[i] + f * stops[i + 1];
}

void write_landscape_ppm(const Landscape& l, const std::filesystem::path& path) {
  double vmax = 0.0;
  for (double v : l.values) vmax = std::max(vmax, v);
  ImageBuffer img(l.lon_cells, l.lat_cells);
  for (int r = 0; r < l.lat_cells; ++r) {
    for (int c = 0; c < l.lon_cells; ++c) {
      const double v = l.values[static_cast<std::size_t>(r) * l.lon_cells + c];
      const Vec3 col = landscape_colormap(vmax > 0.0 ? v / vmax : 0.0);
      for (int ch = 0; ch < 3; ++ch) img.at(c, l.lat_cells - 1 - r, ch) = col[ch];
    }
  }
  write_ppm(img, path);
}

void write_decisions_csv(const std::vector<PlannerDecision>& rows, const std::filesystem::path& path) {
  CsvWriter csv(path, {"round", "mode", "index", "lat", "lon", "U", "steps"});
  for (const PlannerDecision& d : rows) {
    csv.cell(d.round).cell(d.mode).cell(d.index).cell(d.latitude).cell(d.longitude).cell(d.uncertainty).cell(d.steps);
    csv.end_row();
  }
}

}  // namespace sgrf
