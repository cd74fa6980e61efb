#include "sgrf/sobol.hpp"

#include <array>
#include <string>

#include "sgrf/error.hpp"

namespace sgrf {
namespace {

constexpr int kBits = 32;

struct PolyEntry {
  int degree;
  unsigned coeffs;
  std::array<unsigned, 7> m;
};

// Primitive polynomials and initial direction integers for dimensions 2..32
// (new-joe-kuo-6.21201).
constexpr std::array<PolyEntry, 31> kPolys = {{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 3, 5, 9, 1, 25, 53}},
    {7, 14, {1, 3, 1, 13, 9, 35, 107}},
    {7, 19, {1, 3, 1, 5, 27, 61, 31}},
    {7, 21, {1, 1, 5, 11, 19, 41, 61}},
    {7, 28, {1, 3, 5, 3, 3, 13, 69}},
    {7, 31, {1, 1, 7, 13, 1, 19, 1}},
    {7, 32, {1, 3, 7, 5, 13, 19, 59}},
    {7, 37, {1, 1, 3, 9, 25, 29, 41}},
    {7, 41, {1, 3, 5, 13, 23, 1, 55}},
    {7, 42, {1, 3, 7, 3, 13, 59, 17}},
}};

using DirectionTable = std::array<std::array<std::uint32_t, kBits>, SobolStream::kMaxDimension>;

DirectionTable build_directions() {
  DirectionTable v{};
  for (int k = 0; k < kBits; ++k) v[0][k] = std::uint32_t{1} << (kBits - 1 - k);
  for (int d = 1; d < SobolStream::kMaxDimension; ++d) {
    const PolyEntry& p = kPolys[d - 1];
    const int s = p.degree;
    auto& dir = v[d];
    for (int k = 0; k < s && k < kBits; ++k) dir[k] = p.m[k] << (kBits - 1 - k);
    for (int k = s; k < kBits; ++k) {
      std::uint32_t value = dir[k - s] ^ (dir[k - s] >> s);
      for (int j = 1; j < s; ++j) {
        if ((p.coeffs >> (s - 1 - j)) & 1u) value ^= dir[k - j];
      }
      dir[k] = value;
    }
  }
  return v;
}

const DirectionTable& directions() {
  static const DirectionTable table = build_directions();
  return table;
}

void check_dimension(int dimension) {
  if (dimension < 1 || dimension > SobolStream::kMaxDimension) {
    throw ConfigError("sobol dimension must be in [1, 32], got " + std::to_string(dimension));
  }
}

}  // namespace

SobolStream::SobolStream(int dimension, std::uint64_t cursor) : dimension_(dimension), cursor_(cursor) {
  check_dimension(dimension);
}

void SobolStream::next(std::span<double> out) {
  point(dimension_, cursor_, out);
  ++cursor_;
}

std::vector<double> SobolStream::next() {
  std::vector<double> out(static_cast<std::size_t>(dimension_));
  next(out);
  return out;
}

void SobolStream::point(int dimension, std::uint64_t index, std::span<double> out) {
  check_dimension(dimension);
  if (out.size() != static_cast<std::size_t>(dimension)) {
    throw DimensionError("sobol output span has wrong length");
  }
  if (index >> kBits) throw ConfigError("sobol index exceeds 2^32");
  const auto& v = directions();
  const std::uint64_t gray = index ^ (index >> 1);
  constexpr double kScale = 1.0 / 4294967296.0;
  for (int d = 0; d < dimension; ++d) {
    std::uint32_t x = 0;
    for (int k = 0; k < kBits; ++k) {
      if ((gray >> k) & 1u) x ^= v[d][k];
    }
    out[d] = static_cast<double>(x) * kScale;
  }
}

void to_symmetric_cube(std::span<const double> u, std::span<double> z) {
  if (u.size() != z.size()) throw DimensionError("to_symmetric_cube: size mismatch");
  for (std::size_t i = 0; i < u.size(); ++i) z[i] = 2.0 * u[i] - 1.0;
}

std::vector<double> to_symmetric_cube(std::span<const double> u) {
  std::vector<double> z(u.size());
  to_symmetric_cube(u, z);
  return z;
}

}  // namespace sgrf
