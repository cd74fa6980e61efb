#include "sgrf/scene_io.hpp"

#include <fstream>

#include "json.hpp"
#include "sgrf/error.hpp"

namespace sgrf {

using nlohmann::json;

namespace {

json vec_json(const auto& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vec(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N) throw FormatError(std::string("expected ") + std::to_string(N) + "-vector for " + what);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

void write_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_version(const json& j, int expected, const std::filesystem::path& path) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != expected) {
    throw FormatError(path.string() + ": unsupported or missing format_version");
  }
}

json layout_json(const ParamLayout& layout) {
  return {{"appearance", to_string(layout.mode())}, {"primitives", layout.primitive_count()}};
}

ParamLayout json_layout(const json& j) {
  return ParamLayout(appearance_mode_from_string(j.at("appearance").get<std::string>()),
                     j.at("primitives").get<std::size_t>());
}

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  json prims = json::array();
  for (const GaussianPrimitive& p : scene.primitives) {
    prims.push_back({{"position", vec_json(p.position)},
                     {"log_scale", vec_json(p.log_scale)},
                     {"rotation", vec_json(p.rotation)},
                     {"opacity_logit", p.opacity_logit},
                     {"appearance", p.appearance}});
  }
  write_json({{"format_version", kSceneFormatVersion},
              {"appearance", to_string(scene.mode)},
              {"background", vec_json(scene.background)},
              {"primitives", prims}},
             path);
}

Scene load_scene(const std::filesystem::path& path) {
  const json j = read_json(path);
  check_version(j, kSceneFormatVersion, path);
  try {
    Scene scene;
    scene.mode = appearance_mode_from_string(j.at("appearance").get<std::string>());
    scene.background = json_vec<3>(j.at("background"), "background");
    for (const json& p : j.at("primitives")) {
      GaussianPrimitive g;
      g.position = json_vec<3>(p.at("position"), "position");
      g.log_scale = json_vec<3>(p.at("log_scale"), "log_scale");
      g.rotation = json_vec<4>(p.at("rotation"), "rotation");
      g.opacity_logit = p.at("opacity_logit").get<double>();
      g.appearance = p.at("appearance").get<std::vector<double>>();
      if (g.appearance.size() != appearance_size(scene.mode)) throw FormatError("appearance block has wrong length");
      scene.primitives.push_back(std::move(g));
    }
    return scene;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_generator(const GeneratorCheckpoint& c, const std::filesystem::path& path) {
  const ManifoldGenerator& g = c.generator;
  json blocks = json::array();
  for (const GeneratorBlock& b : g.blocks()) blocks.push_back({b.offset, b.size});
  std::vector<int> sign(g.sign().size());
  for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = g.sign()[i] > 0 ? 1 : -1;
  write_json({{"format_version", kGeneratorFormatVersion},
              {"variant", to_string(g.variant())},
              {"latent_dim", g.latent_dim()},
              {"layout", layout_json(c.layout)},
              {"background", vec_json(c.background)},
              {"blocks", blocks},
              {"mean", std::vector<double>(g.mean().begin(), g.mean().end())},
              {"raw", std::vector<double>(g.raw().begin(), g.raw().end())},
              {"sign", sign}},
             path);
}

GeneratorCheckpoint load_generator(const std::filesystem::path& path) {
  const json j = read_json(path);
  check_version(j, kGeneratorFormatVersion, path);
  try {
    GeneratorCheckpoint c;
    c.layout = json_layout(j.at("layout"));
    c.background = json_vec<3>(j.at("background"), "background");
    std::vector<GeneratorBlock> blocks;
    std::size_t storage = 0;
    for (const json& b : j.at("blocks")) {
      const auto off = b.at(0).get<std::size_t>(), size = b.at(1).get<std::size_t>();
      blocks.push_back({off, size, storage});
      storage += size * size;
    }
    std::vector<double> sign;
    for (const json& s : j.at("sign")) sign.push_back(s.get<int>());
    c.generator = ManifoldGenerator(covariance_variant_from_string(j.at("variant").get<std::string>()),
                                    j.at("mean").get<std::vector<double>>(), j.at("latent_dim").get<std::size_t>(),
                                    j.at("raw").get<std::vector<double>>(), std::move(sign), std::move(blocks));
    if (c.generator.dimension() != c.layout.dimension()) throw FormatError("generator does not match its layout");
    return c;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace sgrf
