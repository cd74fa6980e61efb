#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sgrf/error.hpp"
#include "sgrf/image.hpp"
#include "sgrf/metrics.hpp"

using namespace sgrf;

namespace {

// Same pattern as tests/oracles/metrics_oracle.py.
std::pair<ImageBuffer, ImageBuffer> pattern(int w, int h) {
  ImageBuffer a(w, h), b(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        a.at(x, y, c) = 0.5 + 0.4 * std::sin(0.37 * x + 0.21 * y + c);
        b.at(x, y, c) = a.at(x, y, c) + 0.1 * std::cos(0.5 * x - 0.3 * y + 2 * c);
      }
  return {a, b};
}

}  // namespace

TEST(Metrics, SsimMatchesReference) {
  // scikit-image structural_similarity, gaussian weights, sigma 1.5,
  // population covariance, data_range 1.
  auto [a, b] = pattern(32, 24);
  EXPECT_NEAR(ssim(a, b), 0.928921709695764, 1e-9);
  auto [c, d] = pattern(17, 13);
  EXPECT_NEAR(ssim(c, d), 0.923314032734264, 1e-9);
}

TEST(Metrics, PsnrMatchesReference) {
  auto [a, b] = pattern(32, 24);
  EXPECT_NEAR(psnr(a, b), 23.009366420405449, 1e-9);
  auto [c, d] = pattern(17, 13);
  EXPECT_NEAR(psnr(c, d), 23.014353428582062, 1e-9);
}

TEST(Metrics, IdenticalImages) {
  auto [a, b] = pattern(16, 16);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Metrics, PsnrClampsBeforeComparing) {
  ImageBuffer a(4, 4, 1.5), b(4, 4, 1.0);
  EXPECT_EQ(psnr(a, b), std::numeric_limits<double>::infinity());
  ImageBuffer c(4, 4, 0.0);
  EXPECT_NEAR(psnr(a, c), 0.0, 1e-12);
}

TEST(Metrics, ShapeMismatchThrows) {
  ImageBuffer a(4, 4), b(4, 5);
  EXPECT_THROW(psnr(a, b), DimensionError);
  EXPECT_THROW(ssim(a, b), DimensionError);
}

TEST(Metrics, SsimSmallImageUsesGlobalStatistics) {
  auto [a, b] = pattern(6, 5);
  const double s = ssim(a, b);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(Metrics, SsimGradientMatchesFiniteDifference) {
  for (int size : {14, 7}) {
    auto [a, b] = pattern(size, size - 1);
    const SsimWithGradient g = ssim_with_gradient(a, b);
    EXPECT_NEAR(g.value, ssim(a, b), 1e-14);
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.data.size(); i += 7) {
      ImageBuffer ap = a, am = a;
      ap.data[i] += h;
      am.data[i] -= h;
      EXPECT_NEAR(g.d_a.data[i], (ssim(ap, b) - ssim(am, b)) / (2 * h), 1e-7) << "size " << size << " index " << i;
    }
  }
}

TEST(Metrics, AuseMatchesReference) {
  const int n = 57;
  std::vector<double> err(n), unc(n);
  for (int i = 0; i < n; ++i) {
    err[i] = std::abs(std::sin(1.3 * i));
    unc[i] = err[i] + 0.3 * std::abs(std::cos(0.7 * i));
  }
  const AuseResult r = ause(err, unc);
  EXPECT_NEAR(r.area, 0.019456503403878, 1e-12);
  EXPECT_NEAR(r.max_area, 0.803776503019386, 1e-12);
  EXPECT_NEAR(r.score, 0.024206360015240, 1e-12);
  EXPECT_EQ(r.sparsification.size(), 100u);
}

TEST(Metrics, AuseBounds) {
  const std::vector<double> err{0.1, 0.5, 0.2, 0.9, 0.0, 0.3};
  EXPECT_NEAR(ause(err, err).score, 0.0, 1e-15);
  std::vector<double> anti(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) anti[i] = -err[i];
  EXPECT_NEAR(ause(err, anti).score, 1.0, 1e-12);
  const std::vector<double> zeros(6, 0.0);
  EXPECT_EQ(ause(zeros, err).score, 0.0);
  EXPECT_THROW(ause(err, std::vector<double>(5, 0.0)), DimensionError);
}

TEST(Image, PpmRoundTrip) {
  ImageBuffer img(5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i % 11) / 10.0;
  const auto path = std::filesystem::temp_directory_path() / "sgrf_roundtrip.ppm";
  write_ppm(img, path);
  const ImageBuffer back = read_ppm(path);
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_EQ(to_byte(back.data[i]), to_byte(img.data[i]));
  std::filesystem::remove(path);
}

TEST(Image, ToByteRoundsHalfUp) {
  EXPECT_EQ(to_byte(-0.2), 0);
  EXPECT_EQ(to_byte(1.7), 255);
  EXPECT_EQ(to_byte(0.5), 128);
  EXPECT_EQ(to_byte(1.0), 255);
}

TEST(Image, MalformedPpmThrows) {
  const auto path = std::filesystem::temp_directory_path() / "sgrf_bad.ppm";
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n4 4\n255\nabc";
  }
  EXPECT_THROW(read_ppm(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_ppm(path), FormatError);
}
