#include <gtest/gtest.h>

#include <cmath>

#include "sgrf/error.hpp"
#include "sgrf/planner.hpp"
#include "sgrf/sobol.hpp"
#include "unit/test_util.hpp"

using namespace sgrf;
using sgrf::testing::small_camera;

namespace {

struct Model {
  FlatScene flat;
  ManifoldGenerator gen;
  Vec3 background{0.1, 0.05, 0.2};
};

Model model(double raw_value, std::size_t rank = 2, std::uint64_t seed = 1) {
  const FlatScene flat = flatten(sgrf::testing::random_scene(6, AppearanceMode::ShColor, seed));
  ManifoldGenerator g = ManifoldGenerator::low_rank(flat.theta, rank, seed, 0.01);
  const auto r = sgrf::testing::random_vector(g.raw_size(), seed + 10, 0.0, raw_value);
  std::copy(r.begin(), r.end(), g.raw().begin());
  return {flat, g};
}

}  // namespace

TEST(Uncertainty, ZeroGeneratingMatrixGivesZero) {
  const Model m = model(0.0);
  const UncertaintyEstimate u = render_uncertainty(m.gen, m.flat.layout, m.background, small_camera(0.3, 0.2), {});
  EXPECT_EQ(u.total, 0.0);
  for (double v : u.variance) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(u.samples, 2);
}

TEST(Uncertainty, FewerThanTwoSamplesThrows) {
  const Model m = model(0.1);
  UncertaintyOptions o;
  o.samples = 1;
  EXPECT_THROW(render_uncertainty(m.gen, m.flat.layout, m.background, small_camera(0.3, 0.2), {}, o), ConfigError);
}

TEST(Uncertainty, MatchesDirectTwoSampleVariance) {
  const Model m = model(0.05);
  const Camera cam = small_camera(0.4, -0.7);
  const UncertaintyEstimate u = render_uncertainty(m.gen, m.flat.layout, m.background, cam, {});
  ASSERT_EQ(u.z.size(), 2u);
  // first two latent points: the all -1 corner and the center
  for (double z : u.z[0]) EXPECT_EQ(z, -1.0);
  for (double z : u.z[1]) EXPECT_EQ(z, 0.0);
  const std::vector<double> a = m.gen.sample(u.z[0]), b = m.gen.sample(u.z[1]);
  const ImageBuffer ca = render(SceneView{a, m.flat.layout, m.background}, cam).color;
  const ImageBuffer cb = render(SceneView{b, m.flat.layout, m.background}, cam).color;
  double total = 0.0;
  for (std::size_t i = 0; i < ca.data.size(); ++i) {
    const double d = ca.data[i] - cb.data[i];
    total += 0.25 * d * d * 2.0 / 2.0;  // (1/M) sum_j (C_j - mean)^2 with M = 2
  }
  EXPECT_NEAR(u.total, total, 1e-12 * std::max(1.0, total));
  double sum = 0.0;
  for (double v : u.variance) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, u.total, 1e-12);
}

TEST(Uncertainty, SmallGeneratorsScaleQuadratically) {
  Model m = model(1.0);
  const Camera cam = small_camera(0.1, 0.5);
  std::vector<double> raw(m.gen.raw().begin(), m.gen.raw().end());
  auto u_at = [&](double c) {
    for (std::size_t i = 0; i < raw.size(); ++i) m.gen.raw()[i] = c * raw[i];
    return render_uncertainty(m.gen, m.flat.layout, m.background, cam, {}).total;
  };
  const double u1 = u_at(1e-4), u2 = u_at(2e-4);
  EXPECT_NEAR(u2 / u1, 4.0, 1e-2);
}

TEST(Uncertainty, CameraGradientMatchesFiniteDifferences) {
  const Model m = model(0.05);
  const Camera base = small_camera(0.35, 0.8);
  UncertaintyGradient g;
  render_uncertainty(m.gen, m.flat.layout, m.background, base, {}, {}, &g);
  const double h = 1e-5;
  for (int k = 0; k < 3; ++k) {
    auto at = [&](double delta) {
      Camera c = base;
      (k == 0 ? c.latitude : k == 1 ? c.longitude : c.radius) += delta;
      return render_uncertainty(m.gen, m.flat.layout, m.background, c, {}).total;
    };
    const double fd = (at(h) - at(-h)) / (2 * h);
    EXPECT_NEAR(g.camera[k], fd, 1e-4 * std::max(std::abs(fd), 1e-3)) << "coordinate " << k;
  }
}

TEST(CandidateSelection, TiesGoToLowestIndexAndMarkChosen) {
  const Model m = model(0.0);
  CandidatePool pool({small_camera(0.1, 0.0), small_camera(0.2, 1.0), small_camera(-0.3, 2.0)});
  ViewSelection s = select_next_view(m.gen, m.flat.layout, m.background, pool, {});
  EXPECT_EQ(s.index, 0u);
  EXPECT_TRUE(pool.chosen[0]);
  s = select_next_view(m.gen, m.flat.layout, m.background, pool, {});
  EXPECT_EQ(s.index, 1u);
  EXPECT_TRUE(std::isnan(s.scores[0]));
  select_next_view(m.gen, m.flat.layout, m.background, pool, {});
  EXPECT_THROW(select_next_view(m.gen, m.flat.layout, m.background, pool, {}), ConfigError);
  EXPECT_THROW(pool.choose(1), ConfigError);
}

TEST(CandidateSelection, MatchesBruteForce) {
  const Model m = model(0.08);
  std::vector<Camera> cams;
  for (int i = 0; i < 7; ++i) cams.push_back(small_camera(0.9 * std::sin(i), 0.9 * i));
  CandidatePool pool(cams);
  pool.choose(2);
  std::size_t best = 0;
  double best_u = -1.0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (i == 2) continue;
    const double u = render_uncertainty(m.gen, m.flat.layout, m.background, cams[i], {}).total;
    if (u > best_u) {
      best_u = u;
      best = i;
    }
  }
  const ViewSelection s = select_next_view(m.gen, m.flat.layout, m.background, pool, {});
  EXPECT_EQ(s.index, best);
  EXPECT_EQ(s.uncertainty, best_u);
}

TEST(FarthestPoint, MatchesBruteForce) {
  std::vector<Camera> cams;
  for (int i = 0; i < 12; ++i) cams.push_back(small_camera(1.2 * std::sin(1.7 * i), 2.3 * i));
  CandidatePool pool(cams);
  pool.choose(0);
  pool.choose(5);
  const std::vector<Vec3> extra{Vec3(0.0, 0.0, 3.0)};
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (pool.chosen[i]) continue;
    const double d = std::min({(cams[i].position() - cams[0].position()).norm(),
                               (cams[i].position() - cams[5].position()).norm(),
                               (cams[i].position() - extra[0]).norm()});
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  EXPECT_EQ(farthest_point_select(pool, extra), best);
  CandidatePool empty(cams);
  EXPECT_THROW(farthest_point_select(empty, {}), ConfigError);
}

TEST(ViewOptimization, ZeroGeneratorLeavesCameraUnchanged) {
  const Model m = model(0.0);
  const Camera init = small_camera(0.2, 0.4);
  ViewOptimizationOptions o;
  o.steps = 5;
  const ViewOptimization r = optimize_next_view(m.gen, m.flat.layout, m.background, init, {}, o);
  EXPECT_EQ(r.camera.latitude, init.latitude);
  EXPECT_EQ(r.camera.longitude, init.longitude);
  EXPECT_EQ(r.uncertainty, 0.0);
}

TEST(ViewOptimization, ReturnsTrajectoryBest) {
  const Model m = model(0.08);
  ViewOptimizationOptions o;
  o.steps = 20;
  const ViewOptimization r = optimize_next_view(m.gen, m.flat.layout, m.background, small_camera(-0.2, 1.0), {}, o);
  ASSERT_EQ(r.trajectory.size(), 21u);
  double best = -1.0;
  for (const auto& s : r.trajectory) {
    best = std::max(best, s.uncertainty);
    EXPECT_LE(std::abs(s.camera.latitude), o.max_latitude);
  }
  EXPECT_EQ(r.uncertainty, best);
  EXPECT_GE(r.uncertainty, r.initial_uncertainty);
  EXPECT_GT(r.uncertainty, r.initial_uncertainty);
  EXPECT_THROW(optimize_next_view(m.gen, m.flat.layout, m.background, small_camera(0, 0), {}, {0}), ConfigError);
}

TEST(Landscape, ZeroAndRoughness) {
  const Model zero = model(0.0);
  const Landscape l = uncertainty_landscape(zero.gen, zero.flat.layout, zero.background, small_camera(0, 0, 16), {},
                                            8, 16, 1.5);
  ASSERT_EQ(l.values.size(), 128u);
  for (double v : l.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(landscape_roughness(l), 0.0);
  EXPECT_THROW(uncertainty_landscape(zero.gen, zero.flat.layout, zero.background, small_camera(0, 0, 16), {}, 4, 16,
                                     1.5),
               ConfigError);

  Landscape c = l;
  std::fill(c.values.begin(), c.values.end(), 2.0);
  EXPECT_EQ(landscape_roughness(c), 0.0);
  // alternating columns: every horizontal pair differs by 2, vertical pairs by 0
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 16; ++k) c.values[r * 16 + k] = k % 2 ? 3.0 : 1.0;
  const double horizontal = 8 * 16 * 2.0, pairs = 8 * 16 + 7 * 16;
  EXPECT_NEAR(landscape_roughness(c), horizontal / pairs / 2.0, 1e-12);
}
