#include <gtest/gtest.h>

#include <cmath>

#include "sgrf/error.hpp"
#include "sgrf/simd/kernels.hpp"
#include "unit/test_util.hpp"

using namespace sgrf;
using sgrf::testing::random_vector;

namespace {

const simd::Kernels* vector_kernels() { return simd::avx2_kernels(); }

#define REQUIRE_VECTOR_KERNELS()                                        \
  const simd::Kernels* vk = vector_kernels();                           \
  if (vk == nullptr) GTEST_SKIP() << "no vector kernels on this host"; \
  const simd::Kernels& sk = simd::scalar_kernels()

// Lengths that exercise full vectors and every tail size.
const std::size_t kLengths[] = {0, 1, 3, 4, 5, 7, 8, 13, 64, 131};

}  // namespace

TEST(Simd, FootprintRowMatchesScalar) {
  REQUIRE_VECTOR_KERNELS();
  for (std::size_t n : kLengths) {
    const simd::FootprintRow row{0.31, -0.07, 0.19, 10.3, 7.8, 0.83, 9.5, 2};
    std::vector<double> a(n), b(n);
    sk.footprint_row(row, a.data(), n);
    vk->footprint_row(row, b.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-15 + 1e-13 * a[i]) << i;
  }
}

TEST(Simd, FootprintRowWideRange) {
  REQUIRE_VECTOR_KERNELS();
  // Arguments from 0 to well below the 1/255 cutoff.
  const simd::FootprintRow row{0.02, 0.0, 0.02, 0.0, 0.0, 1.0, 0.5, 0};
  const std::size_t n = 200;
  std::vector<double> a(n), b(n);
  sk.footprint_row(row, a.data(), n);
  vk->footprint_row(row, b.data(), n);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(b[i], std::exp(-0.5 * 0.02 * ((i + 0.5) * (i + 0.5) + 0.25)), 1e-15 + 1e-13 * a[i]);
    EXPECT_NEAR(a[i], b[i], 1e-15 + 1e-13 * a[i]);
  }
}

TEST(Simd, SignedReluAxpyMatchesScalar) {
  REQUIRE_VECTOR_KERNELS();
  for (std::size_t n : kLengths) {
    const auto raw = random_vector(n, 1), sign_src = random_vector(n, 2), base = random_vector(n, 3);
    std::vector<double> sign(n);
    for (std::size_t i = 0; i < n; ++i) sign[i] = sign_src[i] > 0 ? 1.0 : -1.0;
    auto a = base, b = base;
    sk.signed_relu_axpy(-0.37, raw.data(), sign.data(), a.data(), n);
    vk->signed_relu_axpy(-0.37, raw.data(), sign.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);

    const auto g = random_vector(n, 4);
    std::vector<double> da(n, 0.5), db(n, 0.5);
    sk.signed_relu_axpy_backward(0.61, g.data(), raw.data(), sign.data(), da.data(), n);
    vk->signed_relu_axpy_backward(0.61, g.data(), raw.data(), sign.data(), db.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(da[i], db[i]);
  }
}

TEST(Simd, ReluSumMatchesScalar) {
  REQUIRE_VECTOR_KERNELS();
  for (std::size_t n : kLengths) {
    const auto raw = random_vector(n, 5);
    std::vector<double> ga(n, 0.0), gb(n, 0.0);
    const double sa = sk.relu_sum(raw.data(), n, -2.0, ga.data());
    const double sb = vk->relu_sum(raw.data(), n, -2.0, gb.data());
    EXPECT_NEAR(sa, sb, 1e-13);
    EXPECT_EQ(ga, gb);
    EXPECT_NEAR(vk->relu_sum(raw.data(), n, 1.0, nullptr), sa, 1e-13);
  }
}

TEST(Simd, AdamUpdateMatchesScalar) {
  REQUIRE_VECTOR_KERNELS();
  for (std::size_t n : kLengths) {
    const auto lr = random_vector(n, 6, 1e-4, 1e-2), g = random_vector(n, 7);
    auto m = random_vector(n, 8, -0.1, 0.1), v = random_vector(n, 9, 0.0, 0.1), p = random_vector(n, 10);
    auto m2 = m, v2 = v, p2 = p;
    const simd::AdamCoeffs c{0.9, 0.999, 1e-8, 1.0 - 0.9 * 0.9, 1.0 - 0.999 * 0.999};
    sk.adam_update(c, lr.data(), g.data(), m.data(), v.data(), p.data(), n);
    vk->adam_update(c, lr.data(), g.data(), m2.data(), v2.data(), p2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(m[i], m2[i], 1e-15);
      EXPECT_NEAR(v[i], v2[i], 1e-15);
      EXPECT_NEAR(p[i], p2[i], 1e-15);
    }
  }
}

TEST(Simd, SquaredDiffMatchesScalar) {
  REQUIRE_VECTOR_KERNELS();
  for (std::size_t n : kLengths) {
    const auto a = random_vector(n, 11), b = random_vector(n, 12);
    std::vector<double> x(n, 1.0), y(n, 1.0);
    sk.squared_diff_accumulate(a.data(), b.data(), x.data(), n);
    vk->squared_diff_accumulate(a.data(), b.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(x[i], y[i]);
  }
}

TEST(Simd, DispatchSelection) {
  const simd::Isa before = simd::active().isa;
  simd::set_active(simd::Isa::Scalar);
  EXPECT_EQ(simd::active().isa, simd::Isa::Scalar);
  if (simd::avx2_kernels() != nullptr) {
    simd::set_active(simd::Isa::Avx2);
    EXPECT_EQ(simd::active().isa, simd::Isa::Avx2);
  } else {
    EXPECT_THROW(simd::set_active(simd::Isa::Avx2), ConfigError);
  }
  simd::set_active(before);
  EXPECT_EQ(simd::isa_name(simd::Isa::Scalar), "scalar");
}
