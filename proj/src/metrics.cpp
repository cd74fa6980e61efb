#include "sgrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgrf/error.hpp"

namespace sgrf {

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image dimensions differ");
  if (a.data.empty()) throw DimensionError("psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::clamp(a.data[i], 0.0, 1.0) - std::clamp(b.data[i], 0.0, 1.0);
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sum / static_cast<double>(a.data.size());
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  const double s = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= s;
  return g;
}

// Valid-mode separable correlation of a single-channel w x h map.
struct SeparableWindow {
  std::vector<double> g;
  int w, h, ow, oh;

  std::vector<double> correlate(const std::vector<double>& in) const {
    const int k = static_cast<int>(g.size());
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += g[i] * in[static_cast<std::size_t>(y) * w + x + i];
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += g[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return out;
  }

  // Transpose of correlate: scatters an ow x oh map back onto w x h.
  std::vector<double> adjoint(const std::vector<double>& in) const {
    const int k = static_cast<int>(g.size());
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double v = in[static_cast<std::size_t>(y) * ow + x];
        for (int i = 0; i < k; ++i) tmp[static_cast<std::size_t>(y + i) * ow + x] += g[i] * v;
      }
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        const double v = tmp[static_cast<std::size_t>(y) * ow + x];
        for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(y) * w + x + i] += g[i] * v;
      }
    return out;
  }
};

// Local SSIM and its partials with respect to (mean_x, E[x^2], E[xy]).
struct SsimTerm {
  double s, d_mx, d_exx, d_exy;
};

SsimTerm ssim_term(double mx, double my, double exx, double eyy, double exy, double c1, double c2) {
  const double a1 = 2.0 * mx * my + c1;
  const double a2 = 2.0 * (exy - mx * my) + c2;
  const double b1 = mx * mx + my * my + c1;
  const double b2 = (exx - mx * mx) + (eyy - my * my) + c2;
  const double num = a1 * a2;
  const double den = b1 * b2;
  const double dnum_dmx = 2.0 * my * a2 - 2.0 * my * a1;
  const double dden_dmx = 2.0 * mx * b2 - 2.0 * mx * b1;
  const double den2 = den * den;
  return {num / den, (dnum_dmx * den - num * dden_dmx) / den2, -num * b1 / den2, 2.0 * a1 / den};
}

std::vector<double> channel(const ImageBuffer& img, int c) {
  std::vector<double> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[3 * i + c];
  return out;
}

SsimWithGradient ssim_impl(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& p, bool want_grad) {
  if (!a.same_shape(b)) throw DimensionError("ssim: image dimensions differ");
  if (a.data.empty()) throw DimensionError("ssim: empty images");
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  SsimWithGradient out;
  if (want_grad) out.d_a = ImageBuffer(a.width, a.height);
  const std::size_t n = a.pixel_count();

  if (a.width < p.window || a.height < p.window) {
    // Global statistics: a single window with uniform weights.
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < 3; ++c) {
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = a.data[3 * i + c], y = b.data[3 * i + c];
        mx += x, my += y, exx += x * x, eyy += y * y, exy += x * y;
      }
      mx *= inv_n, my *= inv_n, exx *= inv_n, eyy *= inv_n, exy *= inv_n;
      const SsimTerm t = ssim_term(mx, my, exx, eyy, exy, c1, c2);
      out.value += t.s / 3.0;
      if (want_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          const double x = a.data[3 * i + c], y = b.data[3 * i + c];
          out.d_a.data[3 * i + c] = (t.d_mx + 2.0 * x * t.d_exx + y * t.d_exy) * inv_n / 3.0;
        }
      }
    }
    return out;
  }

  SeparableWindow win{gaussian_kernel(p.window, p.sigma), a.width, a.height, a.width - p.window + 1,
                      a.height - p.window + 1};
  const std::size_t positions = static_cast<std::size_t>(win.ow) * win.oh;
  const double norm = 1.0 / (3.0 * static_cast<double>(positions));
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const std::vector<double> x = channel(a, c), y = channel(b, c);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) xx[i] = x[i] * x[i], yy[i] = y[i] * y[i], xy[i] = x[i] * y[i];
    const auto mx = win.correlate(x), my = win.correlate(y);
    const auto exx = win.correlate(xx), eyy = win.correlate(yy), exy = win.correlate(xy);
    std::vector<double> g_m, g_xx, g_xy;
    if (want_grad) g_m.resize(positions), g_xx.resize(positions), g_xy.resize(positions);
    double channel_sum = 0.0;
    for (std::size_t k = 0; k < positions; ++k) {
      const SsimTerm t = ssim_term(mx[k], my[k], exx[k], eyy[k], exy[k], c1, c2);
      channel_sum += t.s;
      if (want_grad) g_m[k] = t.d_mx * norm, g_xx[k] = t.d_exx * norm, g_xy[k] = t.d_exy * norm;
    }
    total += channel_sum;
    if (want_grad) {
      const auto dm = win.adjoint(g_m), dxx = win.adjoint(g_xx), dxy = win.adjoint(g_xy);
      for (std::size_t i = 0; i < n; ++i) out.d_a.data[3 * i + c] = dm[i] + 2.0 * x[i] * dxx[i] + y[i] * dxy[i];
    }
  }
  out.value = total * norm;
  return out;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params) {
  return ssim_impl(a, b, params, false).value;
}

SsimWithGradient ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params) {
  return ssim_impl(a, b, params, true);
}

AuseResult ause(std::span<const double> error, std::span<const double> uncertainty, int steps) {
  if (error.size() != uncertainty.size()) throw DimensionError("ause: error and uncertainty lengths differ");
  if (steps < 1) throw ConfigError("ause: steps must be positive");
  AuseResult result;
  const std::size_t n = error.size();
  result.sparsification.assign(static_cast<std::size_t>(steps), 0.0);
  result.oracle.assign(static_cast<std::size_t>(steps), 0.0);
  const double total = std::accumulate(error.begin(), error.end(), 0.0);
  if (n == 0 || total == 0.0) return result;
  for (double e : error)
    if (e < 0.0) throw ConfigError("ause: errors must be non-negative");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return uncertainty[i] > uncertainty[j]; });
  std::vector<double> by_uncertainty(n), descending(error.begin(), error.end());
  for (std::size_t i = 0; i < n; ++i) by_uncertainty[i] = error[order[i]];
  std::sort(descending.begin(), descending.end(), std::greater<>());

  // Mean of the kept tail [removed, n) of an ordering, via suffix sums.
  auto curve = [&](const std::vector<double>& ordered) {
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + ordered[i];
    std::vector<double> c(static_cast<std::size_t>(steps));
    const double full_mean = total / static_cast<double>(n);
    for (int k = 0; k < steps; ++k) {
      const std::size_t removed = static_cast<std::size_t>(k) * n / static_cast<std::size_t>(steps);
      c[k] = suffix[removed] / static_cast<double>(n - removed) / full_mean;
    }
    return c;
  };
  result.sparsification = curve(by_uncertainty);
  result.oracle = curve(descending);
  const std::vector<double> ascending(descending.rbegin(), descending.rend());
  const std::vector<double> worst = curve(ascending);
  const double dx = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    result.area += (result.sparsification[k] - result.oracle[k]) * dx;
    result.max_area += (worst[k] - result.oracle[k]) * dx;
  }
  result.score = result.max_area > 0.0 ? std::clamp(result.area / result.max_area, 0.0, 1.0) : 0.0;
  return result;
}

}  // namespace sgrf
