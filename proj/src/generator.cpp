#include "sgrf/generator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sgrf/error.hpp"
#include "sgrf/random.hpp"
#include "sgrf/simd/kernels.hpp"
#include "sgrf/sobol.hpp"

namespace sgrf {

std::string to_string(CovarianceVariant v) {
  switch (v) {
    case CovarianceVariant::LowRank: return "low-rank";
    case CovarianceVariant::Diagonal: return "diagonal";
    case CovarianceVariant::BlockDiagonal: return "block-diagonal";
  }
  return "?";
}

CovarianceVariant covariance_variant_from_string(const std::string& s) {
  if (s == "low-rank") return CovarianceVariant::LowRank;
  if (s == "diagonal") return CovarianceVariant::Diagonal;
  if (s == "block-diagonal") return CovarianceVariant::BlockDiagonal;
  throw ConfigError("unknown covariance variant '" + s + "' (expected low-rank|diagonal|block-diagonal)");
}

ManifoldGenerator::ManifoldGenerator(CovarianceVariant variant, std::vector<double> mean, std::size_t latent_dim,
                                     std::vector<double> raw, std::vector<double> sign,
                                     std::vector<GeneratorBlock> blocks)
    : variant_(variant),
      mean_(std::move(mean)),
      latent_(latent_dim),
      raw_(std::move(raw)),
      sign_(std::move(sign)),
      blocks_(std::move(blocks)) {
  const std::size_t d = mean_.size();
  if (d == 0) throw ConfigError("generator: empty mean");
  std::size_t expected = 0;
  switch (variant_) {
    case CovarianceVariant::LowRank:
      if (latent_ < 1 || latent_ > d) throw ConfigError("generator: rank must be in [1, D]");
      expected = d * latent_;
      break;
    case CovarianceVariant::Diagonal:
      if (latent_ != d) throw ConfigError("generator: diagonal variant needs m = D");
      expected = d;
      break;
    case CovarianceVariant::BlockDiagonal: {
      if (latent_ != d) throw ConfigError("generator: block-diagonal variant needs m = D");
      std::size_t next_row = 0, next_storage = 0;
      for (const GeneratorBlock& b : blocks_) {
        if (b.offset != next_row || b.storage != next_storage || b.size == 0) {
          throw ConfigError("generator: blocks must tile [0, D) in order");
        }
        next_row += b.size;
        next_storage += b.size * b.size;
      }
      if (next_row != d) throw ConfigError("generator: blocks do not cover D");
      expected = next_storage;
      break;
    }
  }
  if (raw_.size() != expected || sign_.size() != expected) {
    throw DimensionError("generator: raw/sign storage has " + std::to_string(raw_.size()) + "/" +
                         std::to_string(sign_.size()) + " entries, expected " + std::to_string(expected));
  }
  for (double s : sign_)
    if (s != 1.0 && s != -1.0) throw ConfigError("generator: sign mask entries must be +-1");
}

namespace {

std::vector<double> draw_signs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> s(n);
  for (double& v : s) v = random_sign(rng);
  return s;
}

void check_eps(double eps0) {
  if (!(eps0 > 0.0)) throw ConfigError("generator: eps0 must be positive");
}

}  // namespace

ManifoldGenerator ManifoldGenerator::low_rank(std::vector<double> mean, std::size_t rank, std::uint64_t seed,
                                              double eps0) {
  check_eps(eps0);
  const std::size_t d = mean.size();
  if (rank < 1) throw ConfigError("generator: rank must be at least 1");
  if (rank > d) throw ConfigError("generator: rank " + std::to_string(rank) + " exceeds D = " + std::to_string(d));
  return ManifoldGenerator(CovarianceVariant::LowRank, std::move(mean), rank, std::vector<double>(d * rank, eps0),
                           draw_signs(d * rank, seed));
}

ManifoldGenerator ManifoldGenerator::diagonal(std::vector<double> mean, std::uint64_t seed, double eps0) {
  check_eps(eps0);
  const std::size_t d = mean.size();
  return ManifoldGenerator(CovarianceVariant::Diagonal, std::move(mean), d, std::vector<double>(d, eps0),
                           draw_signs(d, seed));
}

ManifoldGenerator ManifoldGenerator::block_diagonal(std::vector<double> mean,
                                                   const std::vector<std::pair<std::size_t, std::size_t>>& spec,
                                                   std::uint64_t seed, double eps0) {
  check_eps(eps0);
  std::vector<GeneratorBlock> blocks;
  std::size_t storage = 0;
  for (const auto& [offset, size] : spec) {
    blocks.push_back({offset, size, storage});
    storage += size * size;
  }
  const std::size_t d = mean.size();
  return ManifoldGenerator(CovarianceVariant::BlockDiagonal, std::move(mean), d, std::vector<double>(storage, eps0),
                           draw_signs(storage, seed), std::move(blocks));
}

ManifoldGenerator init_generator(std::size_t dimension, std::size_t rank, std::uint64_t seed, double eps0) {
  if (dimension == 0) throw ConfigError("init_generator: D must be positive");
  return ManifoldGenerator::low_rank(std::vector<double>(dimension, 0.0), rank, seed, eps0);
}

void ManifoldGenerator::sample(std::span<const double> z, std::span<double> theta) const {
  const std::size_t d = dimension();
  if (z.size() != latent_) {
    throw DimensionError("generator sample: z has " + std::to_string(z.size()) + " entries, expected " +
                         std::to_string(latent_));
  }
  if (theta.size() != d) throw DimensionError("generator sample: output has wrong length");
  std::copy(mean_.begin(), mean_.end(), theta.begin());
  switch (variant_) {
    case CovarianceVariant::LowRank: {
      const auto& k = simd::active();
      for (std::size_t j = 0; j < latent_; ++j) {
        if (z[j] == 0.0) continue;
        k.signed_relu_axpy(z[j], raw_.data() + j * d, sign_.data() + j * d, theta.data(), d);
      }
      break;
    }
    case CovarianceVariant::Diagonal:
      for (std::size_t i = 0; i < d; ++i) theta[i] += sign_[i] * std::max(raw_[i], 0.0) * z[i];
      break;
    case CovarianceVariant::BlockDiagonal:
      for (const GeneratorBlock& b : blocks_) {
        for (std::size_t r = 0; r < b.size; ++r) {
          const double* braw = raw_.data() + b.storage + r * b.size;
          const double* bsign = sign_.data() + b.storage + r * b.size;
          double acc = 0.0;
          for (std::size_t c = 0; c < b.size; ++c) acc += bsign[c] * std::max(braw[c], 0.0) * z[b.offset + c];
          theta[b.offset + r] += acc;
        }
      }
      break;
  }
}

std::vector<double> ManifoldGenerator::sample(std::span<const double> z) const {
  std::vector<double> theta(dimension());
  sample(z, theta);
  return theta;
}

void ManifoldGenerator::sample_backward(std::span<const double> z, std::span<const double> d_theta,
                                        std::span<double> d_mean, std::span<double> d_raw) const {
  const std::size_t d = dimension();
  if (z.size() != latent_ || d_theta.size() != d || d_mean.size() != d || d_raw.size() != raw_.size()) {
    throw DimensionError("generator sample_backward: size mismatch");
  }
  for (std::size_t i = 0; i < d; ++i) d_mean[i] += d_theta[i];
  switch (variant_) {
    case CovarianceVariant::LowRank: {
      const auto& k = simd::active();
      for (std::size_t j = 0; j < latent_; ++j) {
        if (z[j] == 0.0) continue;
        k.signed_relu_axpy_backward(z[j], d_theta.data(), raw_.data() + j * d, sign_.data() + j * d,
                                    d_raw.data() + j * d, d);
      }
      break;
    }
    case CovarianceVariant::Diagonal:
      for (std::size_t i = 0; i < d; ++i) {
        if (raw_[i] > 0.0) d_raw[i] += d_theta[i] * z[i] * sign_[i];
      }
      break;
    case CovarianceVariant::BlockDiagonal:
      for (const GeneratorBlock& b : blocks_) {
        for (std::size_t r = 0; r < b.size; ++r) {
          const double g = d_theta[b.offset + r];
          if (g == 0.0) continue;
          for (std::size_t c = 0; c < b.size; ++c) {
            const std::size_t idx = b.storage + r * b.size + c;
            if (raw_[idx] > 0.0) d_raw[idx] += g * z[b.offset + c] * sign_[idx];
          }
        }
      }
      break;
  }
}

double ManifoldGenerator::volume_surrogate(std::span<double> d_raw, double scale) const {
  if (!d_raw.empty() && d_raw.size() != raw_.size()) throw DimensionError("volume_surrogate: gradient size mismatch");
  // |S (.) relu(b)| = relu(b), so the signs drop out.
  return simd::active().relu_sum(raw_.data(), raw_.size(), scale, d_raw.empty() ? nullptr : d_raw.data());
}

Eigen::MatrixXd ManifoldGenerator::materialize() const {
  const std::size_t d = dimension();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(latent_));
  switch (variant_) {
    case CovarianceVariant::LowRank:
      for (std::size_t j = 0; j < latent_; ++j)
        for (std::size_t i = 0; i < d; ++i) b(i, j) = sign_[j * d + i] * std::max(raw_[j * d + i], 0.0);
      break;
    case CovarianceVariant::Diagonal:
      for (std::size_t i = 0; i < d; ++i) b(i, i) = sign_[i] * std::max(raw_[i], 0.0);
      break;
    case CovarianceVariant::BlockDiagonal:
      for (const GeneratorBlock& blk : blocks_)
        for (std::size_t r = 0; r < blk.size; ++r)
          for (std::size_t c = 0; c < blk.size; ++c) {
            const std::size_t idx = blk.storage + r * blk.size + c;
            b(blk.offset + r, blk.offset + c) = sign_[idx] * std::max(raw_[idx], 0.0);
          }
      break;
  }
  return b;
}

double ManifoldGenerator::max_column_cosine() const {
  if (variant_ != CovarianceVariant::LowRank || latent_ < 2) return 0.0;
  const Eigen::MatrixXd b = materialize();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < b.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < b.cols(); ++j) {
      const double ni = b.col(i).norm(), nj = b.col(j).norm();
      if (ni == 0.0 || nj == 0.0) continue;
      worst = std::max(worst, std::abs(b.col(i).dot(b.col(j))) / (ni * nj));
    }
  }
  return worst;
}

ManifoldGenerator ManifoldGenerator::remap_rows(std::span<const std::size_t> source,
                                                const std::vector<std::pair<std::size_t, std::size_t>>& new_blocks) const {
  const std::size_t d_old = dimension(), d_new = source.size();
  for (std::size_t s : source)
    if (s >= d_old) throw DimensionError("remap_rows: source row out of range");
  std::vector<double> mean(d_new);
  for (std::size_t r = 0; r < d_new; ++r) mean[r] = mean_[source[r]];
  switch (variant_) {
    case CovarianceVariant::LowRank: {
      std::vector<double> raw(d_new * latent_), sign(d_new * latent_);
      for (std::size_t j = 0; j < latent_; ++j)
        for (std::size_t r = 0; r < d_new; ++r) {
          raw[j * d_new + r] = raw_[j * d_old + source[r]];
          sign[j * d_new + r] = sign_[j * d_old + source[r]];
        }
      return ManifoldGenerator(variant_, std::move(mean), latent_, std::move(raw), std::move(sign));
    }
    case CovarianceVariant::Diagonal: {
      std::vector<double> raw(d_new), sign(d_new);
      for (std::size_t r = 0; r < d_new; ++r) raw[r] = raw_[source[r]], sign[r] = sign_[source[r]];
      return ManifoldGenerator(variant_, std::move(mean), d_new, std::move(raw), std::move(sign));
    }
    case CovarianceVariant::BlockDiagonal: {
      // Row -> (block, local index) of the old tiling.
      std::vector<std::size_t> block_of(d_old);
      for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
        for (std::size_t r = 0; r < blocks_[bi].size; ++r) block_of[blocks_[bi].offset + r] = bi;
      std::vector<GeneratorBlock> blocks;
      std::vector<double> raw, sign;
      for (const auto& [offset, size] : new_blocks) {
        const GeneratorBlock& src = blocks_[block_of[source[offset]]];
        if (src.size != size) throw ConfigError("remap_rows: new block does not match its source block");
        for (std::size_t r = 1; r < size; ++r) {
          if (source[offset + r] != source[offset] + r) throw ConfigError("remap_rows: block rows must stay contiguous");
        }
        if (source[offset] != src.offset) throw ConfigError("remap_rows: new block must start at a source block");
        blocks.push_back({offset, size, raw.size()});
        raw.insert(raw.end(), raw_.begin() + static_cast<std::ptrdiff_t>(src.storage),
                   raw_.begin() + static_cast<std::ptrdiff_t>(src.storage + size * size));
        sign.insert(sign.end(), sign_.begin() + static_cast<std::ptrdiff_t>(src.storage),
                    sign_.begin() + static_cast<std::ptrdiff_t>(src.storage + size * size));
      }
      return ManifoldGenerator(variant_, std::move(mean), d_new, std::move(raw), std::move(sign), std::move(blocks));
    }
  }
  return *this;
}

LatentSequence::LatentSequence(std::size_t dimension, std::uint64_t seed) : dim_(dimension), seed_(seed) {
  if (dimension == 0) throw ConfigError("latent sequence: dimension must be positive");
}

void LatentSequence::point(std::uint64_t index, std::span<double> z) const {
  if (z.size() != dim_) throw DimensionError("latent sequence: output has wrong length");
  if (dim_ <= static_cast<std::size_t>(SobolStream::kMaxDimension)) {
    SobolStream::point(static_cast<int>(dim_), index, z);
    to_symmetric_cube(z, z);
    return;
  }
  if (index < 2) {
    std::fill(z.begin(), z.end(), index == 0 ? -1.0 : 0.0);
    return;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  Rng rng(seq);
  for (double& v : z) v = uniform(rng, -1.0, 1.0);
}

std::vector<double> LatentSequence::point(std::uint64_t index) const {
  std::vector<double> z(dim_);
  point(index, z);
  return z;
}

std::vector<std::pair<std::size_t, std::size_t>> field_blocks(const ParamLayout& layout, std::size_t max_block) {
  if (max_block == 0) throw ConfigError("field_blocks: block size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < layout.primitive_count(); ++i) {
    for (Field f : kAllFields) {
      const std::size_t off = layout.offset(i, f), len = layout.length(f);
      for (std::size_t k = 0; k < len; k += max_block) out.emplace_back(off + k, std::min(max_block, len - k));
    }
  }
  return out;
}

namespace {

// Calls fn(centered_sample) for n uniform draws; same seed => same draws.
template <typename Fn>
void stream_samples(const ManifoldGenerator& gen, std::size_t n, std::uint64_t seed, std::span<const double> center,
                    Fn&& fn) {
  Rng rng(seed);
  std::vector<double> z(gen.latent_dim()), theta(gen.dimension());
  for (std::size_t s = 0; s < n; ++s) {
    for (double& v : z) v = uniform(rng, -1.0, 1.0);
    gen.sample(z, theta);
    if (!center.empty())
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= center[i];
    fn(std::span<const double>(theta));
  }
}

std::vector<double> sample_mean(const ManifoldGenerator& gen, std::size_t n, std::uint64_t seed) {
  std::vector<double> mean(gen.dimension(), 0.0);
  stream_samples(gen, n, seed, {}, [&](std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) mean[i] += x[i];
  });
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

}  // namespace

std::vector<double> covariance_rank_probe(const ManifoldGenerator& gen, std::size_t n_samples, std::uint64_t seed) {
  const std::size_t m = gen.latent_dim();
  if (n_samples < 10 * m) throw ConfigError("covariance_rank_probe: need at least 10 m samples");
  const auto d = static_cast<Eigen::Index>(gen.dimension());
  const auto k = static_cast<Eigen::Index>(std::min<std::size_t>(gen.dimension(), m + 3));
  const std::vector<double> center = sample_mean(gen, n_samples, seed);

  auto apply_cov = [&](const Eigen::MatrixXd& q) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(d, k);
    stream_samples(gen, n_samples, seed, center, [&](std::span<const double> x) {
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
      const Eigen::RowVectorXd proj = xv.transpose() * q;
      y.noalias() += xv * proj;
    });
    return Eigen::MatrixXd(y / static_cast<double>(n_samples));
  };

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::MatrixXd q(d, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < d; ++i) q(i, j) = normal(rng);
  for (int iter = 0; iter < 6; ++iter) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(apply_cov(q));
    q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  }
  const Eigen::MatrixXd small = q.transpose() * apply_cov(q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (small + small.transpose()));
  // Covariance eigenvalue lambda <-> singular value sqrt(n lambda) of the
  // centered n x D sample matrix.
  std::vector<double> values(eig.eigenvalues().data(), eig.eigenvalues().data() + k);
  for (double& v : values) v = std::sqrt(std::max(v, 0.0) * static_cast<double>(n_samples));
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

std::vector<double> empirical_variance(const ManifoldGenerator& gen, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw ConfigError("empirical_variance: need at least two samples");
  const std::vector<double> center = sample_mean(gen, n_samples, seed);
  std::vector<double> var(gen.dimension(), 0.0);
  stream_samples(gen, n_samples, seed, center, [&](std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) var[i] += x[i] * x[i];
  });
  for (double& v : var) v /= static_cast<double>(n_samples);
  return var;
}

}  // namespace sgrf
