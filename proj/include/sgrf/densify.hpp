#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sgrf/generator.hpp"

namespace sgrf {

struct DensifyThresholds {
  /// Accumulated positional gradient norm above which a primitive densifies.
  double gradient = std::numeric_limits<double>::infinity();
  /// Largest activated scale at or below which a primitive is cloned; above
  /// it the primitive is split in two.
  double clone_max_scale = 0.05;
  /// Children of a split shrink their scales by this factor.
  double split_shrink = 1.6;
};

inline constexpr std::size_t kFreshRow = std::numeric_limits<std::size_t>::max();

struct DensifyResult {
  ManifoldGenerator generator;
  ParamLayout layout;
  /// For every row of the new parameter vector: the old row it continues, or
  /// kFreshRow for rows of newly created primitives (optimizer moments restart).
  std::vector<std::size_t> row_source;
  std::size_t cloned = 0;
  std::size_t split = 0;
};

/// Clone/split primitives whose `gradient_norm` exceeds the threshold.
/// Survivors keep their rows and order; clones and split children are
/// appended. New primitives copy the parent's mean, raw-matrix and sign rows;
/// split children then move by a draw from the parent Gaussian and shrink.
DensifyResult densify(const ManifoldGenerator& generator, const ParamLayout& layout,
                      std::span<const double> gradient_norm, const DensifyThresholds& thresholds, std::uint64_t seed);

}  // namespace sgrf
