#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sgrf {

/// Unscrambled Sobol low-discrepancy sequence (Joe-Kuo direction numbers),
/// Gray-code ordered, starting at the origin. Each point is a pure function
/// of (dimension, index), so a stream is fully described by its cursor.
class SobolStream {
 public:
  static constexpr int kMaxDimension = 32;

  explicit SobolStream(int dimension, std::uint64_t cursor = 0);

  /// Writes the point at the cursor into `out` and advances the cursor.
  void next(std::span<double> out);
  std::vector<double> next();

  int dimension() const { return dimension_; }
  std::uint64_t cursor() const { return cursor_; }
  void seek(std::uint64_t cursor) { cursor_ = cursor; }

  /// Point `index` of the `dimension`-dimensional sequence.
  static void point(int dimension, std::uint64_t index, std::span<double> out);

 private:
  int dimension_;
  std::uint64_t cursor_;
};

/// Componentwise affine map [0,1)^m -> [-1,1)^m, z = 2u - 1.
void to_symmetric_cube(std::span<const double> u, std::span<double> z);
std::vector<double> to_symmetric_cube(std::span<const double> u);

}  // namespace sgrf
