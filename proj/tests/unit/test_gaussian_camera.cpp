#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgrf/camera.hpp"
#include "sgrf/error.hpp"
#include "sgrf/gaussian.hpp"
#include "unit/test_util.hpp"

using namespace sgrf;

TEST(Gaussian, FlattenRoundTrip) {
  for (AppearanceMode mode : {AppearanceMode::ShColor, AppearanceMode::Transfer}) {
    const Scene scene = sgrf::testing::random_scene(4, mode, 3);
    const FlatScene flat = flatten(scene);
    EXPECT_EQ(flat.theta.size(), 4 * (11 + appearance_size(mode)));
    const Scene back = unflatten(flat.theta, flat.layout, scene.background);
    EXPECT_EQ(back, scene);
  }
}

TEST(Gaussian, LayoutOffsets) {
  const ParamLayout layout(AppearanceMode::ShColor, 3);
  EXPECT_EQ(layout.stride(), 59u);
  EXPECT_EQ(layout.offset(2, Field::Opacity), 2 * 59u + 10);
  EXPECT_EQ(layout.primitive_of(70), 1u);
  EXPECT_EQ(layout.field_of(59 + 7), Field::Rotation);
  EXPECT_EQ(layout.length(Field::Appearance), 48u);
  EXPECT_EQ(ParamLayout(AppearanceMode::Transfer, 1).length(Field::Appearance), 768u);
}

TEST(Gaussian, FlattenRejectsBadInput) {
  Scene empty;
  EXPECT_THROW(flatten(empty), ConfigError);
  Scene bad = sgrf::testing::random_scene(2, AppearanceMode::ShColor, 1);
  bad.primitives[1].appearance.resize(10);
  EXPECT_THROW(flatten(bad), ConfigError);
  EXPECT_THROW(unflatten(std::vector<double>(5), ParamLayout(AppearanceMode::ShColor, 1)), DimensionError);
}

TEST(Gaussian, ActivationIsPositiveDefinite) {
  const ActivatedGaussian g = activate(Vec3(1, 2, 3), Vec3(-1.0, 0.2, -2.0), Vec4(2.0, 0.3, -0.4, 0.1), 0.4);
  EXPECT_NEAR(g.unit_rotation.norm(), 1.0, 1e-15);
  EXPECT_NEAR((g.rotation * g.rotation.transpose() - Mat3::Identity()).norm(), 0.0, 1e-14);
  EXPECT_NEAR(g.rotation.determinant(), 1.0, 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(g.covariance);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(eig.eigenvalues()[0], std::exp(-4.0), 1e-12);
  EXPECT_NEAR(g.opacity, 1.0 / (1.0 + std::exp(-0.4)), 1e-15);
  EXPECT_THROW(activate(Vec3::Zero(), Vec3::Zero(), Vec4::Zero(), 0.0), NumericError);
}

TEST(Camera, LooksAtTarget) {
  Camera cam;
  cam.latitude = 0.4;
  cam.longitude = -1.1;
  cam.look_at = Vec3(0.1, 0.2, -0.3);
  const CameraFrame fr = camera_frame(cam);
  const Vec3 t = fr.rotation * (cam.look_at - fr.position);
  EXPECT_NEAR(t.x(), 0.0, 1e-14);
  EXPECT_NEAR(t.y(), 0.0, 1e-14);
  EXPECT_NEAR(t.z(), cam.radius, 1e-14);
  EXPECT_NEAR((fr.rotation * fr.rotation.transpose() - Mat3::Identity()).norm(), 0.0, 1e-14);
  // World up maps to image up (negative y).
  EXPECT_LT((fr.rotation * Vec3::UnitZ()).y(), 0.0);
}

TEST(Camera, FrameDerivativesMatchFiniteDifference) {
  Camera cam;
  cam.latitude = 0.3;
  cam.longitude = 0.8;
  cam.radius = 3.5;
  const CameraFrame fr = camera_frame(cam);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Camera cp = cam, cm = cam;
    double* fp = k == 0 ? &cp.latitude : k == 1 ? &cp.longitude : &cp.radius;
    double* fm = k == 0 ? &cm.latitude : k == 1 ? &cm.longitude : &cm.radius;
    *fp += h;
    *fm -= h;
    const CameraFrame a = camera_frame(cp), b = camera_frame(cm);
    EXPECT_NEAR((fr.d_position[k] - (a.position - b.position) / (2 * h)).norm(), 0.0, 1e-8) << k;
    EXPECT_NEAR((fr.d_rotation[k] - (a.rotation - b.rotation) / (2 * h)).norm(), 0.0, 1e-8) << k;
  }
}

TEST(Camera, PoleFallsBackToAnotherUp) {
  Camera cam;
  cam.latitude = M_PI / 2;
  const CameraFrame fr = camera_frame(cam);
  EXPECT_NEAR((fr.rotation * fr.rotation.transpose() - Mat3::Identity()).norm(), 0.0, 1e-12);
  EXPECT_TRUE(fr.rotation.allFinite());
}

TEST(Camera, InvalidIntrinsicsThrow) {
  Camera cam;
  cam.radius = 0.0;
  EXPECT_THROW(camera_frame(cam), ConfigError);
  cam.radius = 2.0;
  cam.width = 0;
  EXPECT_THROW(camera_frame(cam), ConfigError);
}

TEST(Camera, CenterRayHitsLookAt) {
  Camera cam;
  cam.width = 8;
  cam.height = 8;
  cam.latitude = -0.2;
  cam.longitude = 2.0;
  const auto rays = generate_rays(cam);
  ASSERT_EQ(rays.size(), 64u);
  // Pixel (4,4) has center (4.5, 4.5); the principal point is (4, 4).
  const Ray& r = rays[4 * 8 + 4];
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-14);
  const Vec3 to_target = (cam.look_at - r.origin).normalized();
  EXPECT_GT(r.direction.dot(to_target), 0.999);
  EXPECT_EQ(r.origin, cam.position());
}
