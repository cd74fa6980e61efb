#pragma once

#include <filesystem>

#include "sgrf/gaussian.hpp"
#include "sgrf/generator.hpp"

namespace sgrf {

inline constexpr int kSceneFormatVersion = 1;
inline constexpr int kGeneratorFormatVersion = 1;

/// Scene file: JSON with named fields and a "format_version" key.
void save_scene(const Scene& scene, const std::filesystem::path& path);
/// Throws FormatError for unreadable files, unknown versions or missing fields.
Scene load_scene(const std::filesystem::path& path);

/// Generator checkpoint: mean, raw matrix, sign mask, rank, variant, blocks
/// and the parameter layout it was built for.
struct GeneratorCheckpoint {
  ManifoldGenerator generator;
  ParamLayout layout;
  Vec3 background = Vec3::Zero();
};

void save_generator(const GeneratorCheckpoint& checkpoint, const std::filesystem::path& path);
GeneratorCheckpoint load_generator(const std::filesystem::path& path);

}  // namespace sgrf
