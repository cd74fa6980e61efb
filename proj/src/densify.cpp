#include "sgrf/densify.hpp"

#include <cmath>

#include "sgrf/error.hpp"
#include "sgrf/random.hpp"

namespace sgrf {

DensifyResult densify(const ManifoldGenerator& gen, const ParamLayout& layout, std::span<const double> gradient_norm,
                      const DensifyThresholds& t, std::uint64_t seed) {
  const std::size_t n = layout.primitive_count(), stride = layout.stride();
  if (gradient_norm.size() != n) throw DimensionError("densify: one gradient statistic per primitive expected");
  if (gen.dimension() != layout.dimension()) throw DimensionError("densify: generator does not match layout");

  std::vector<std::size_t> keep, clone, split;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(gradient_norm[i] > t.gradient)) {
      keep.push_back(i);
      continue;
    }
    const ActivatedGaussian g = activate(gen.mean(), layout, i);
    if (g.scale.maxCoeff() <= t.clone_max_scale) {
      keep.push_back(i);
      clone.push_back(i);
    } else {
      split.push_back(i);
    }
  }

  DensifyResult out;
  out.cloned = clone.size();
  out.split = split.size();
  if (clone.empty() && split.empty()) {
    out.generator = gen;
    out.layout = layout;
    out.row_source.resize(gen.dimension());
    for (std::size_t r = 0; r < out.row_source.size(); ++r) out.row_source[r] = r;
    return out;
  }

  // Parent primitive of every new primitive slot.
  std::vector<std::size_t> parent = keep;
  parent.insert(parent.end(), clone.begin(), clone.end());
  for (std::size_t i : split) {
    parent.push_back(i);
    parent.push_back(i);
  }
  out.layout = ParamLayout(layout.mode(), parent.size());

  std::vector<std::size_t> source(out.layout.dimension());
  out.row_source.assign(source.size(), kFreshRow);
  for (std::size_t p = 0; p < parent.size(); ++p) {
    for (std::size_t k = 0; k < stride; ++k) {
      source[p * stride + k] = parent[p] * stride + k;
      if (p < keep.size()) out.row_source[p * stride + k] = parent[p] * stride + k;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  if (gen.variant() == CovarianceVariant::BlockDiagonal) {
    // Every primitive has the same block pattern; replicate primitive 0's.
    std::vector<std::pair<std::size_t, std::size_t>> pattern;
    for (const GeneratorBlock& b : gen.blocks())
      if (b.offset < stride) pattern.emplace_back(b.offset, b.size);
    for (std::size_t p = 0; p < parent.size(); ++p)
      for (const auto& [off, size] : pattern) blocks.emplace_back(p * stride + off, size);
  }
  out.generator = gen.remap_rows(source, blocks);

  Rng rng(seed);
  const std::span<double> mean = out.generator.mean();
  const double shrink = std::log(t.split_shrink);
  for (std::size_t p = keep.size() + clone.size(); p < parent.size(); ++p) {
    const ActivatedGaussian g = activate(gen.mean(), layout, parent[p]);
    const Vec3 offset = g.rotation * g.scale.cwiseProduct(Vec3(normal(rng), normal(rng), normal(rng)));
    const std::size_t pos = out.layout.offset(p, Field::Position), ls = out.layout.offset(p, Field::LogScale);
    for (int k = 0; k < 3; ++k) {
      mean[pos + k] += offset[k];
      mean[ls + k] -= shrink;
    }
  }
  return out;
}

}  // namespace sgrf
