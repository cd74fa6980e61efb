#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sgrf/gaussian.hpp"

namespace sgrf {

enum class CovarianceVariant { LowRank, Diagonal, BlockDiagonal };

std::string to_string(CovarianceVariant v);
CovarianceVariant covariance_variant_from_string(const std::string& s);

/// Square diagonal block of the generating matrix: rows/cols [offset, offset+size).
struct GeneratorBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t storage = 0;  ///< start of the row-major size x size block in raw()

  bool operator==(const GeneratorBlock&) const = default;
};

/// theta = mean + B z with B = S (.) max(B_raw, 0) and z in [-1, 1]^m.
///
/// Storage of B_raw and S depends on the variant:
///  - low-rank: D x m column-major (column j at [j D, (j+1) D));
///  - diagonal: length D, m = D;
///  - block-diagonal: concatenated row-major square blocks, m = D.
/// S is fixed at construction.
class ManifoldGenerator {
 public:
  ManifoldGenerator() = default;

  /// Assembles a generator from stored parts (checkpoints). Validates sizes
  /// and that every sign is +-1.
  ManifoldGenerator(CovarianceVariant variant, std::vector<double> mean, std::size_t latent_dim,
                    std::vector<double> raw, std::vector<double> sign, std::vector<GeneratorBlock> blocks = {});

  static ManifoldGenerator low_rank(std::vector<double> mean, std::size_t rank, std::uint64_t seed, double eps0);
  static ManifoldGenerator diagonal(std::vector<double> mean, std::uint64_t seed, double eps0);
  /// `blocks` as (offset, size) pairs that tile [0, D) in order.
  static ManifoldGenerator block_diagonal(std::vector<double> mean,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                                          std::uint64_t seed, double eps0);

  CovarianceVariant variant() const { return variant_; }
  std::size_t dimension() const { return mean_.size(); }
  std::size_t latent_dim() const { return latent_; }
  std::size_t raw_size() const { return raw_.size(); }

  std::span<double> mean() { return mean_; }
  std::span<const double> mean() const { return mean_; }
  std::span<double> raw() { return raw_; }
  std::span<const double> raw() const { return raw_; }
  std::span<const double> sign() const { return sign_; }
  const std::vector<GeneratorBlock>& blocks() const { return blocks_; }

  /// theta = mean + B z. Throws DimensionError on size mismatch.
  void sample(std::span<const double> z, std::span<double> theta) const;
  std::vector<double> sample(std::span<const double> z) const;

  /// Accumulates d mean += d_theta and d_raw += (d_theta z^T) (.) S (.) [B_raw > 0].
  void sample_backward(std::span<const double> z, std::span<const double> d_theta, std::span<double> d_mean,
                       std::span<double> d_raw) const;

  /// ||B||_1. When `d_raw` is non-empty adds `scale * d||B||_1/dB_raw`.
  double volume_surrogate(std::span<double> d_raw = {}, double scale = 1.0) const;

  /// Effective B as a dense D x m matrix (tests and small problems only).
  Eigen::MatrixXd materialize() const;

  /// Largest |cosine| between two distinct effective columns (low-rank only;
  /// 0 for other variants or m = 1). Zero columns are ignored.
  double max_column_cosine() const;

  /// Rows of the new generator copy rows `source[r]` of this one (mean,
  /// raw, sign). Block-diagonal generators need the new block tiling.
  ManifoldGenerator remap_rows(std::span<const std::size_t> source,
                               const std::vector<std::pair<std::size_t, std::size_t>>& new_blocks = {}) const;

 private:
  CovarianceVariant variant_ = CovarianceVariant::LowRank;
  std::vector<double> mean_;
  std::size_t latent_ = 0;
  std::vector<double> raw_;
  std::vector<double> sign_;
  std::vector<GeneratorBlock> blocks_;
};

/// Low-rank generator with mean 0: B_raw = eps0, S iid +-1 from `seed`.
/// Throws ConfigError if rank < 1, rank > D or eps0 <= 0.
ManifoldGenerator init_generator(std::size_t dimension, std::size_t rank, std::uint64_t seed, double eps0);

/// Per-primitive field blocks, each split into chunks of at most `max_block`.
std::vector<std::pair<std::size_t, std::size_t>> field_blocks(const ParamLayout& layout, std::size_t max_block);

/// Top min(D, m + 3) singular values (descending) of the centered n x D matrix
/// of `n_samples` uniform draws, by streaming subspace iteration on the
/// sample covariance (no D x D matrix). s_k^2 / n are the covariance
/// eigenvalues. Requires n_samples >= 10 m.
std::vector<double> covariance_rank_probe(const ManifoldGenerator& gen, std::size_t n_samples, std::uint64_t seed);

/// Latent points z in [-1, 1]^m indexed by a cursor. For m <= 32 this is the
/// Sobol sequence mapped to the symmetric cube. For larger m the first two
/// points keep their Sobol values (every coordinate 0, then 1/2, i.e. z = -1
/// and z = 0) and later points are uniform draws keyed by (seed, index).
class LatentSequence {
 public:
  LatentSequence(std::size_t dimension, std::uint64_t seed);
  std::size_t dimension() const { return dim_; }
  void point(std::uint64_t index, std::span<double> z) const;
  std::vector<double> point(std::uint64_t index) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Empirical per-coordinate variance of `n_samples` uniform draws.
std::vector<double> empirical_variance(const ManifoldGenerator& gen, std::size_t n_samples, std::uint64_t seed);

}  // namespace sgrf
