#include "sgrf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgrf/error.hpp"
#include "sgrf/prt.hpp"
#include "sgrf/simd/kernels.hpp"

namespace sgrf {
namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;

struct Projection {
  Vec3 t;  // camera-space mean
  Mat23 jacobian;
  Mat3 view_cov;  // W Sigma W^T
  Mat2 cov2d;
  Vec2 mean;
  bool valid = false;
  bool ill_conditioned = false;
};

Projection project(const ActivatedGaussian& g, const CameraFrame& frame, const Camera& cam, const RenderSettings& s) {
  Projection p;
  p.t = frame.rotation * (g.position - frame.position);
  if (!(p.t.z() > s.near_plane)) return p;
  const double f = cam.focal_length;
  const double iz = 1.0 / p.t.z();
  p.jacobian << f * iz, 0.0, -f * p.t.x() * iz * iz,  //
      0.0, f * iz, -f * p.t.y() * iz * iz;
  p.view_cov = frame.rotation * g.covariance * frame.rotation.transpose();
  p.cov2d = p.jacobian * p.view_cov * p.jacobian.transpose();
  p.cov2d(0, 0) += s.dilation;
  p.cov2d(1, 1) += s.dilation;
  p.mean = Vec2(f * p.t.x() * iz + cam.cx(), f * p.t.y() * iz + cam.cy());
  // Eigenvalues of the symmetric 2x2 covariance for the conditioning check.
  const double tr = p.cov2d.trace(), det = p.cov2d.determinant();
  const double disc = std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
  const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
  if (!(lmin > 0.0) || lmax / lmin > s.max_condition) {
    p.ill_conditioned = true;
    return p;
  }
  p.valid = true;
  return p;
}

std::span<const double> appearance(const SceneView& scene, std::size_t i) {
  return scene.theta.subspan(scene.layout.offset(i, Field::Appearance), appearance_size(scene.layout.mode()));
}

Vec3 sh_color(std::span<const double> coeffs, const ShBasis& basis) {
  Vec3 c;
  for (int ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (int k = 0; k < kShBasis; ++k) acc += coeffs[static_cast<std::size_t>(ch * kShBasis + k)] * basis[k];
    c[ch] = acc;
  }
  return c;
}

void check_inputs(const SceneView& scene, std::span<const double> light) {
  if (scene.layout.primitive_count() == 0) throw ConfigError("render: scene has no primitives");
  if (scene.theta.size() != scene.layout.dimension()) throw DimensionError("render: theta does not match layout");
  if (scene.layout.mode() == AppearanceMode::Transfer && light.size() != static_cast<std::size_t>(kShBasis)) {
    throw ConfigError("render: transfer appearance needs a 16-coefficient light");
  }
}

struct Contribution {
  std::uint32_t pixel;
  std::uint32_t primitive;
  double alpha;
  bool clamped;
};

}  // namespace

ProjectedGaussian project_gaussian(const ActivatedGaussian& g, const Camera& camera, const RenderSettings& settings) {
  const CameraFrame frame = camera_frame(camera);
  const Projection p = project(g, frame, camera, settings);
  ProjectedGaussian out;
  out.depth = p.t.z();
  out.valid = p.valid;
  if (p.valid) {
    out.mean = p.mean;
    out.covariance = p.cov2d;
  }
  return out;
}

RenderOutput render(const Scene& scene, const Camera& camera, std::span<const double> light,
                    const RenderSettings& settings) {
  const FlatScene flat = flatten(scene);
  return render(SceneView{flat.theta, flat.layout, scene.background}, camera, light, settings);
}

RenderOutput render(const SceneView& scene, const Camera& camera, std::span<const double> light,
                    const RenderSettings& settings) {
  check_inputs(scene, light);
  const CameraFrame frame = camera_frame(camera);
  const std::size_t n = scene.layout.primitive_count();
  const int w = camera.width, h = camera.height;
  const bool transfer = scene.layout.mode() == AppearanceMode::Transfer;

  RenderOutput out;
  out.splats.resize(n);
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ActivatedGaussian g = activate(scene.theta, scene.layout, i);
    const Projection p = project(g, frame, camera, settings);
    Splat& sp = out.splats[i];
    sp.depth = p.t.z();
    if (!p.valid) {
      if (p.ill_conditioned) {
        ++out.diagnostics.ill_conditioned;
      } else {
        ++out.diagnostics.behind_camera;
      }
      continue;
    }
    if (g.opacity < settings.alpha_min) continue;
    const Mat2 conic = p.cov2d.inverse();
    sp.mean = p.mean;
    sp.conic_a = conic(0, 0);
    sp.conic_b = 0.5 * (conic(0, 1) + conic(1, 0));
    sp.conic_c = conic(1, 1);
    sp.opacity = g.opacity;
    const ShBasis basis = sh_eval((g.position - frame.position).normalized());
    sp.raw_color = transfer ? shade_unclamped(appearance(scene, i), light, basis) : sh_color(appearance(scene, i), basis);
    sp.color = sp.raw_color.cwiseMax(0.0);
    // Exact box of the ellipse where opacity * exp(-q/2) >= alpha_min.
    const double q_max = 2.0 * std::log(g.opacity / settings.alpha_min);
    const double ex = std::sqrt(q_max * p.cov2d(0, 0)), ey = std::sqrt(q_max * p.cov2d(1, 1));
    sp.x_min = std::max(0, static_cast<int>(std::ceil(sp.mean.x() - ex - 0.5)));
    sp.x_max = std::min(w - 1, static_cast<int>(std::floor(sp.mean.x() + ex - 0.5)));
    sp.y_min = std::max(0, static_cast<int>(std::ceil(sp.mean.y() - ey - 0.5)));
    sp.y_max = std::min(h - 1, static_cast<int>(std::floor(sp.mean.y() + ey - 0.5)));
    if (sp.x_min > sp.x_max || sp.y_min > sp.y_max) continue;
    sp.valid = true;
    order.push_back(static_cast<std::uint32_t>(i));
  }
  out.diagnostics.visible = order.size();
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return out.splats[a].depth < out.splats[b].depth;
  });

  // Footprints in depth order; a stable bucket by pixel keeps each pixel's
  // contributions front to back.
  const auto& kernels = simd::active();
  std::vector<Contribution> contributions;
  std::vector<double> row;
  for (const std::uint32_t i : order) {
    const Splat& sp = out.splats[i];
    const std::size_t span = static_cast<std::size_t>(sp.x_max - sp.x_min + 1);
    row.resize(span);
    for (int y = sp.y_min; y <= sp.y_max; ++y) {
      const simd::FootprintRow fr{sp.conic_a, sp.conic_b, sp.conic_c, sp.mean.x(), sp.mean.y(),
                                  sp.opacity, y + 0.5,    sp.x_min};
      kernels.footprint_row(fr, row.data(), span);
      for (std::size_t k = 0; k < span; ++k) {
        const double a = row[k];
        if (a < settings.alpha_min) continue;
        const bool clamped = a > settings.alpha_max;
        contributions.push_back({static_cast<std::uint32_t>(y * w + sp.x_min + static_cast<int>(k)), i,
                                 clamped ? settings.alpha_max : a, clamped});
      }
    }
  }
  out.diagnostics.contributions = contributions.size();

  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  out.record_offset.assign(pixels + 1, 0);
  for (const Contribution& c : contributions) ++out.record_offset[c.pixel + 1];
  std::partial_sum(out.record_offset.begin(), out.record_offset.end(), out.record_offset.begin());
  out.records.resize(contributions.size());
  {
    std::vector<std::uint32_t> cursor(out.record_offset.begin(), out.record_offset.end() - 1);
    for (const Contribution& c : contributions) {
      out.records[cursor[c.pixel]++] = {c.primitive, c.clamped ? 1u : 0u, c.alpha, 0.0};
    }
  }

  out.color = ImageBuffer(w, h);
  out.alpha.assign(pixels, 0.0);
  out.depth.assign(pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    double t = 1.0;
    Vec3 c = Vec3::Zero();
    double d = 0.0;
    for (std::uint32_t r = out.record_offset[p]; r < out.record_offset[p + 1]; ++r) {
      BlendRecord& rec = out.records[r];
      rec.transmittance = t;
      const Splat& sp = out.splats[rec.primitive];
      const double weight = rec.alpha * t;
      c += weight * sp.color;
      d += weight * sp.depth;
      t *= 1.0 - rec.alpha;
    }
    c += t * scene.background;
    for (int ch = 0; ch < 3; ++ch) out.color.data[3 * p + ch] = c[ch];
    out.alpha[p] = 1.0 - t;
    out.depth[p] = out.alpha[p] > 0.0 ? d / out.alpha[p] : 0.0;
  }
  return out;
}

RenderGradients render_backward(const SceneView& scene, const Camera& camera, std::span<const double> light,
                                const RenderOutput& fwd, const ImageBuffer& d_color, const RenderSettings& settings) {
  check_inputs(scene, light);
  if (!fwd.has_blend_records()) throw ConfigError("render_backward: forward output has no blend records");
  if (d_color.width != camera.width || d_color.height != camera.height) {
    throw DimensionError("render_backward: loss gradient image does not match the camera");
  }
  const std::size_t n = scene.layout.primitive_count();
  if (fwd.splats.size() != n) throw DimensionError("render_backward: forward pass is for a different scene");
  const int w = camera.width;
  const bool transfer = scene.layout.mode() == AppearanceMode::Transfer;

  struct Accum {
    Vec2 mean = Vec2::Zero();
    double a = 0, b = 0, c = 0;
    double opacity = 0;
    Vec3 color = Vec3::Zero();
    bool touched = false;
  };
  std::vector<Accum> acc(n);

  const std::size_t pixels = fwd.record_offset.size() - 1;
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint32_t begin = fwd.record_offset[p], end = fwd.record_offset[p + 1];
    if (begin == end) continue;
    const Vec3 g(d_color.data[3 * p], d_color.data[3 * p + 1], d_color.data[3 * p + 2]);
    if (g.isZero(0.0)) continue;
    const double px = static_cast<double>(p % static_cast<std::size_t>(w)) + 0.5;
    const double py = static_cast<double>(p / static_cast<std::size_t>(w)) + 0.5;
    Vec3 behind = scene.background;  // color composited behind the current record
    for (std::uint32_t r = end; r-- > begin;) {
      const BlendRecord& rec = fwd.records[r];
      const Splat& sp = fwd.splats[rec.primitive];
      Accum& a = acc[rec.primitive];
      a.touched = true;
      a.color += (rec.alpha * rec.transmittance) * g;
      const double d_alpha = rec.transmittance * g.dot(sp.color - behind);
      behind = rec.alpha * sp.color + (1.0 - rec.alpha) * behind;
      if (rec.clamped) continue;
      a.opacity += d_alpha * rec.alpha / sp.opacity;
      const double dq = -0.5 * d_alpha * rec.alpha;
      const double dx = px - sp.mean.x(), dy = py - sp.mean.y();
      a.a += dq * dx * dx;
      a.b += dq * 2.0 * dx * dy;
      a.c += dq * dy * dy;
      a.mean.x() += dq * -2.0 * (sp.conic_a * dx + sp.conic_b * dy);
      a.mean.y() += dq * -2.0 * (sp.conic_b * dx + sp.conic_c * dy);
    }
  }

  RenderGradients grads;
  grads.theta.assign(scene.layout.dimension(), 0.0);
  const CameraFrame frame = camera_frame(camera);
  Vec3 d_cam_pos = Vec3::Zero();
  Mat3 d_cam_rot = Mat3::Zero();
  const double f = camera.focal_length;

  for (std::size_t i = 0; i < n; ++i) {
    const Accum& a = acc[i];
    if (!a.touched) continue;
    const ActivatedGaussian g = activate(scene.theta, scene.layout, i);
    const Projection proj = project(g, frame, camera, settings);
    const Splat& sp = fwd.splats[i];
    double* out = grads.theta.data() + i * scene.layout.stride();
    Vec3 d_position = Vec3::Zero();

    // Appearance and view direction.
    const Vec3 view = g.position - frame.position;
    const ShBasisWithGradient basis = sh_eval_with_gradient(view);
    ShBasis d_basis{};
    const std::span<const double> app = appearance(scene, i);
    double* d_app = out + ParamLayout::field_offset(Field::Appearance);
    if (transfer) {
      const ShadeGradient sg = shade_backward(app, light, basis.value, a.color);
      for (std::size_t k = 0; k < sg.d_transfer.size(); ++k) d_app[k] += sg.d_transfer[k];
      for (int k = 0; k < kShBasis; ++k) grads.light[k] += sg.d_light[k];
      d_basis = sg.d_basis;
    } else {
      for (int ch = 0; ch < 3; ++ch) {
        if (!(sp.raw_color[ch] > 0.0)) continue;
        const double gc = a.color[ch];
        for (int k = 0; k < kShBasis; ++k) {
          d_app[ch * kShBasis + k] += gc * basis.value[k];
          d_basis[k] += gc * app[static_cast<std::size_t>(ch * kShBasis + k)];
        }
      }
    }
    Vec3 d_view = Vec3::Zero();
    for (int k = 0; k < kShBasis; ++k) d_view += d_basis[k] * basis.d_direction[k];
    d_position += d_view;
    d_cam_pos -= d_view;

    // Opacity.
    out[ParamLayout::field_offset(Field::Opacity)] += a.opacity * g.opacity * (1.0 - g.opacity);

    // Conic -> 2D covariance.
    const Mat2 conic = proj.cov2d.inverse();
    Mat2 g_conic;
    g_conic << a.a, 0.5 * a.b, 0.5 * a.b, a.c;
    const Mat2 g_cov2d = -conic * g_conic * conic;

    // cov2d = J M J^T, M = W Sigma W^T.
    const Mat23 g_jac = 2.0 * g_cov2d * proj.jacobian * proj.view_cov;
    const Mat3 g_view_cov = proj.jacobian.transpose() * g_cov2d * proj.jacobian;
    const Mat3 g_sigma = frame.rotation.transpose() * g_view_cov * frame.rotation;
    d_cam_rot += 2.0 * g_view_cov * frame.rotation * g.covariance;

    // Sigma = R S^2 R^T.
    const Vec3 s2 = g.scale.array().square();
    const Mat3 g_rot = 2.0 * g_sigma * g.rotation * s2.asDiagonal();
    const Mat3 rsr = g.rotation.transpose() * g_sigma * g.rotation;
    for (int k = 0; k < 3; ++k) out[ParamLayout::field_offset(Field::LogScale) + k] += rsr(k, k) * 2.0 * s2[k];

    const Vec4& q = g.unit_rotation;
    const double qw = q[0], qx = q[1], qy = q[2], qz = q[3];
    const Mat3& G = g_rot;
    Vec4 d_unit;
    d_unit[0] = 2.0 * (-qz * G(0, 1) + qy * G(0, 2) + qz * G(1, 0) - qx * G(1, 2) - qy * G(2, 0) + qx * G(2, 1));
    d_unit[1] = 2.0 * (qy * G(0, 1) + qz * G(0, 2) + qy * G(1, 0) - 2.0 * qx * G(1, 1) - qw * G(1, 2) +
                       qz * G(2, 0) + qw * G(2, 1) - 2.0 * qx * G(2, 2));
    d_unit[2] = 2.0 * (-2.0 * qy * G(0, 0) + qx * G(0, 1) + qw * G(0, 2) + qx * G(1, 0) + qz * G(1, 2) -
                       qw * G(2, 0) + qz * G(2, 1) - 2.0 * qy * G(2, 2));
    d_unit[3] = 2.0 * (-2.0 * qz * G(0, 0) - qw * G(0, 1) + qx * G(0, 2) + qw * G(1, 0) - 2.0 * qz * G(1, 1) +
                       qy * G(1, 2) + qx * G(2, 0) + qy * G(2, 1));
    const double* raw_q = scene.theta.data() + scene.layout.offset(i, Field::Rotation);
    const double raw_norm = Vec4(raw_q[0], raw_q[1], raw_q[2], raw_q[3]).norm();
    const Vec4 d_raw_q = (d_unit - q * q.dot(d_unit)) / raw_norm;
    for (int k = 0; k < 4; ++k) out[ParamLayout::field_offset(Field::Rotation) + k] += d_raw_q[k];

    // Jacobian and projected mean -> camera-space mean t.
    const double tx = proj.t.x(), ty = proj.t.y(), tz = proj.t.z();
    const double iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 d_t = Vec3::Zero();
    d_t.x() += g_jac(0, 2) * (-f * iz2);
    d_t.y() += g_jac(1, 2) * (-f * iz2);
    d_t.z() += (g_jac(0, 0) + g_jac(1, 1)) * (-f * iz2) + g_jac(0, 2) * (2.0 * f * tx * iz3) +
               g_jac(1, 2) * (2.0 * f * ty * iz3);
    d_t.x() += a.mean.x() * f * iz;
    d_t.y() += a.mean.y() * f * iz;
    d_t.z() += -(a.mean.x() * f * tx + a.mean.y() * f * ty) * iz2;

    // t = W (p - c)
    const Vec3 d_world = frame.rotation.transpose() * d_t;
    d_position += d_world;
    d_cam_pos -= d_world;
    d_cam_rot += d_t * view.transpose();

    for (int k = 0; k < 3; ++k) out[ParamLayout::field_offset(Field::Position) + k] += d_position[k];
  }

  for (int k = 0; k < 3; ++k) {
    grads.camera[k] = d_cam_pos.dot(frame.d_position[k]) + d_cam_rot.cwiseProduct(frame.d_rotation[k]).sum();
  }
  return grads;
}

}  // namespace sgrf
