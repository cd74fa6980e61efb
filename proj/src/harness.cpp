#include "sgrf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>

#include "json.hpp"

#include "sgrf/csv.hpp"
#include "sgrf/error.hpp"
#include "sgrf/image.hpp"
#include "sgrf/metrics.hpp"
#include "sgrf/random.hpp"
#include "sgrf/scene_io.hpp"

namespace sgrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) { return splitmix(seed ^ splitmix(tag)); }

// Seed tags within one scene.
enum : std::uint64_t { kTagInit = 1, kTagSigns, kTagLatent, kTagRandomArm, kTagRandomCamera, kTagTestLights };

const char* const kModeNames[] = {"fit", "plan-views", "plan-lights", "landscape", "ablate-covariance", "eval"};

}  // namespace

std::string to_string(ExperimentMode mode) { return kModeNames[static_cast<int>(mode)]; }

ExperimentMode experiment_mode_from_string(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == kModeNames[i]) return static_cast<ExperimentMode>(i);
  throw ConfigError("unknown mode '" + s + "'");
}

std::string GeneratorSpec::name() const {
  if (variant == "low-rank") return "rank-" + std::to_string(rank);
  return variant;
}

GeneratorSpec GeneratorSpec::parse(const std::string& name) { return parse(name, GeneratorSpec{}); }

GeneratorSpec GeneratorSpec::parse(const std::string& name, const GeneratorSpec& base) {
  GeneratorSpec g = base;
  if (name == "deterministic" || name == "diagonal" || name == "block-diagonal" || name == "low-rank") {
    g.variant = name;
    return g;
  }
  if (name.rfind("rank-", 0) == 0) {
    std::size_t pos = 0;
    int k = 0;
    try {
      k = std::stoi(name.substr(5), &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != name.size() - 5 || k < 1) throw ConfigError("bad generator name '" + name + "'");
    g.variant = "low-rank";
    g.rank = static_cast<std::size_t>(k);
    return g;
  }
  throw ConfigError("unknown generator variant '" + name + "'");
}

ManifoldGenerator GeneratorSpec::build(std::vector<double> mean, const ParamLayout& layout,
                                       std::uint64_t seed) const {
  if (variant == "diagonal") return ManifoldGenerator::diagonal(std::move(mean), seed, eps0);
  if (variant == "block-diagonal")
    return ManifoldGenerator::block_diagonal(std::move(mean), field_blocks(layout, max_block), seed, eps0);
  if (variant == "deterministic") return ManifoldGenerator::low_rank(std::move(mean), 1, seed, eps0);
  if (variant == "low-rank") return ManifoldGenerator::low_rank(std::move(mean), rank, seed, eps0);
  throw ConfigError("unknown generator variant '" + variant + "'");
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (scenes < 1) throw ConfigError("config: scenes must be >= 1");
  if (rig.resolution < 16) throw ConfigError("config: resolution must be at least 16");
  if (!(rig.radius > extent)) throw ConfigError("config: camera radius must exceed the scene extent");
  if (scene_file.empty() && gt_primitives < 1) throw ConfigError("config: scene needs primitives");
  if (fit_primitives < 1) throw ConfigError("config: fit primitives must be >= 1");
  if (pool_size < 2) throw ConfigError("config: pool needs at least 2 cameras");
  if (test_views < 1) throw ConfigError("config: need at least one test view");
  training.validate();
  GeneratorSpec::parse(generator.name(), generator);
  switch (mode) {
    case ExperimentMode::PlanViews:
      if (rounds < 1) throw ConfigError("plan-views: rounds must be >= 1");
      if (initial_views < 1 || initial_views + rounds > pool_size)
        throw ConfigError("plan-views: initial views + rounds must fit in the pool");
      if (training.iterations_per_view < 1) throw ConfigError("plan-views: iterations_per_view must be >= 1");
      break;
    case ExperimentMode::PlanLights:
      if (rounds < 1 || rounds > kShBasis - 1) throw ConfigError("plan-lights: rounds must be in [1, 15]");
      if (light_cameras < 1 || light_cameras > pool_size) throw ConfigError("plan-lights: bad light_cameras");
      if (test_lights < 1) throw ConfigError("plan-lights: need at least one test light");
      if (training.iterations_per_light < 1) throw ConfigError("plan-lights: iterations_per_light must be >= 1");
      break;
    case ExperimentMode::Landscape:
      if (landscape_lat < 8 || landscape_lon < 16) throw ConfigError("landscape: grid must be at least 8 x 16");
      [[fallthrough]];
    case ExperimentMode::Fit:
    case ExperimentMode::Eval:
    case ExperimentMode::AblateCovariance:
      if (training.total_iterations < 1 && checkpoint.empty())
        throw ConfigError("config: total_iterations must be >= 1");
      break;
  }
  if (mode == ExperimentMode::Landscape && (initial_views < 1 || initial_views >= pool_size))
    throw ConfigError("landscape: bad initial view count");
  if ((mode == ExperimentMode::Fit || mode == ExperimentMode::Eval) && (train_views < 1 || train_views > pool_size))
    throw ConfigError("config: train_views must be in [1, pool]");
  if (mode == ExperimentMode::AblateCovariance && (ablation_views < 1 || ablation_views > pool_size))
    throw ConfigError("ablate-covariance: ablation_views must be in [1, pool]");
  if (arms.empty()) throw ConfigError("config: no arms");
  std::set<std::string> seen;
  for (const std::string& a : arms) {
    if (!seen.insert(a).second) throw ConfigError("config: duplicate arm '" + a + "'");
    if (mode == ExperimentMode::PlanViews && a != "random" && a != "farthest" && a != "select" &&
        a != "opt-select" && a != "opt-random")
      throw ConfigError("plan-views: unknown arm '" + a + "'");
    if (mode == ExperimentMode::PlanLights && a != "random" && a != "select" && a != "optimize")
      throw ConfigError("plan-lights: unknown arm '" + a + "'");
    if (mode == ExperimentMode::Landscape || mode == ExperimentMode::AblateCovariance) GeneratorSpec::parse(a);
  }
  if (mode == ExperimentMode::Landscape)
    for (const std::string& a : arms)
      if (GeneratorSpec::parse(a).deterministic()) throw ConfigError("landscape: deterministic model has no U");
}

ExperimentConfig default_config(ExperimentMode mode) {
  ExperimentConfig c;
  c.mode = mode;
  // Per-entry volume weight and slow appearance spread for desk-sized scenes.
  c.training.volume_weight = 0.1;
  c.training.raw_lr.appearance = 0.0002;
  c.training.record_timing = false;
  c.rig.resolution = 64;
  switch (mode) {
    case ExperimentMode::PlanViews: c.arms = {"random", "farthest", "select", "opt-select", "opt-random"}; break;
    case ExperimentMode::PlanLights: c.arms = {"random", "select", "optimize"}; break;
    case ExperimentMode::Landscape: c.arms = {"rank-2", "diagonal"}; break;
    case ExperimentMode::AblateCovariance:
      c.arms = {"deterministic", "diagonal", "block-diagonal", "rank-1", "rank-2", "rank-4", "rank-10"};
      break;
    case ExperimentMode::Fit:
    case ExperimentMode::Eval: c.arms = {"model"}; break;
  }
  if (mode == ExperimentMode::PlanLights) c.appearance = AppearanceMode::Transfer;
  return c;
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void get_rates(const json& j, const char* key, FieldRates& r) {
  if (!j.contains(key)) return;
  const json& o = j.at(key);
  check_keys(o, key, {"position", "log_scale", "rotation", "opacity", "appearance"});
  get(o, "position", r.position);
  get(o, "log_scale", r.log_scale);
  get(o, "rotation", r.rotation);
  get(o, "opacity", r.opacity);
  get(o, "appearance", r.appearance);
}

json rates_json(const FieldRates& r) {
  return {{"position", r.position}, {"log_scale", r.log_scale}, {"rotation", r.rotation},
          {"opacity", r.opacity}, {"appearance", r.appearance}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "", {"mode", "seed", "scenes", "scene", "fit", "camera", "views", "rounds", "training", "generator",
                     "uncertainty", "view_optimization", "light_optimization", "landscape", "arms", "checkpoint",
                     "output", "write_images"});
  ExperimentConfig c = base;
  if (j.contains("mode")) {
    const ExperimentMode m = experiment_mode_from_string(j.at("mode").get<std::string>());
    if (m != c.mode) {
      // Mode-specific defaults for the arm list and appearance.
      const ExperimentConfig d = default_config(m);
      c.mode = m;
      c.arms = d.arms;
      c.appearance = d.appearance;
    }
  }
  get(j, "seed", c.seed);
  get(j, "scenes", c.scenes);
  get(j, "rounds", c.rounds);
  get(j, "checkpoint", c.checkpoint);
  get(j, "write_images", c.write_images);
  if (j.contains("output")) c.output = j.at("output").get<std::string>();
  if (j.contains("scene")) {
    const json& s = j.at("scene");
    check_keys(s, "scene", {"primitives", "extent", "file", "appearance"});
    get(s, "primitives", c.gt_primitives);
    get(s, "extent", c.extent);
    get(s, "file", c.scene_file);
    if (s.contains("appearance")) c.appearance = appearance_mode_from_string(s.at("appearance").get<std::string>());
  }
  if (j.contains("fit")) {
    const json& s = j.at("fit");
    check_keys(s, "fit", {"primitives", "init_scale"});
    get(s, "primitives", c.fit_primitives);
    get(s, "init_scale", c.init_scale);
  }
  if (j.contains("camera")) {
    const json& s = j.at("camera");
    check_keys(s, "camera", {"resolution", "radius", "focal_scale", "max_abs_z"});
    get(s, "resolution", c.rig.resolution);
    get(s, "radius", c.rig.radius);
    get(s, "focal_scale", c.rig.focal_scale);
    get(s, "max_abs_z", c.rig.max_abs_z);
  }
  if (j.contains("views")) {
    const json& s = j.at("views");
    check_keys(s, "views", {"pool", "test", "initial", "train", "ablation", "light_cameras", "test_lights"});
    get(s, "pool", c.pool_size);
    get(s, "test", c.test_views);
    get(s, "initial", c.initial_views);
    get(s, "train", c.train_views);
    get(s, "ablation", c.ablation_views);
    get(s, "light_cameras", c.light_cameras);
    get(s, "test_lights", c.test_lights);
  }
  if (j.contains("training")) {
    const json& s = j.at("training");
    check_keys(s, "training", {"samples_per_iteration", "volume_weight", "volume_period", "iterations_per_view",
                               "iterations_per_light", "total_iterations", "ssim_weight", "mean_lr", "raw_lr",
                               "densify_interval", "densify", "freeze_generator"});
    TrainingConfig& t = c.training;
    get(s, "samples_per_iteration", t.samples_per_iteration);
    get(s, "volume_weight", t.volume_weight);
    get(s, "volume_period", t.volume_period);
    get(s, "iterations_per_view", t.iterations_per_view);
    get(s, "iterations_per_light", t.iterations_per_light);
    get(s, "total_iterations", t.total_iterations);
    get(s, "ssim_weight", t.ssim_weight);
    get(s, "densify_interval", t.densify_interval);
    get(s, "freeze_generator", t.freeze_generator);
    get_rates(s, "mean_lr", t.mean_lr);
    get_rates(s, "raw_lr", t.raw_lr);
    if (s.contains("densify")) {
      const json& d = s.at("densify");
      check_keys(d, "densify", {"gradient", "clone_max_scale", "split_shrink"});
      get(d, "gradient", t.densify.gradient);
      get(d, "clone_max_scale", t.densify.clone_max_scale);
      get(d, "split_shrink", t.densify.split_shrink);
    }
  }
  if (j.contains("generator")) {
    const json& s = j.at("generator");
    check_keys(s, "generator", {"variant", "rank", "eps0", "max_block"});
    get(s, "rank", c.generator.rank);
    get(s, "eps0", c.generator.eps0);
    get(s, "max_block", c.generator.max_block);
    if (s.contains("variant")) c.generator = GeneratorSpec::parse(s.at("variant").get<std::string>(), c.generator);
  }
  if (j.contains("uncertainty")) {
    const json& s = j.at("uncertainty");
    check_keys(s, "uncertainty", {"samples"});
    get(s, "samples", c.uncertainty.samples);
  }
  if (j.contains("view_optimization")) {
    const json& s = j.at("view_optimization");
    check_keys(s, "view_optimization", {"steps", "learning_rate", "optimize_radius", "min_radius", "max_latitude"});
    get(s, "steps", c.view_optimization.steps);
    get(s, "learning_rate", c.view_optimization.learning_rate);
    get(s, "optimize_radius", c.view_optimization.optimize_radius);
    get(s, "min_radius", c.view_optimization.min_radius);
    get(s, "max_latitude", c.view_optimization.max_latitude);
  }
  if (j.contains("light_optimization")) {
    const json& s = j.at("light_optimization");
    check_keys(s, "light_optimization", {"steps", "learning_rate"});
    get(s, "steps", c.light_optimization.steps);
    get(s, "learning_rate", c.light_optimization.learning_rate);
  }
  if (j.contains("landscape")) {
    const json& s = j.at("landscape");
    check_keys(s, "landscape", {"lat_cells", "lon_cells", "max_latitude"});
    get(s, "lat_cells", c.landscape_lat);
    get(s, "lon_cells", c.landscape_lon);
    get(s, "max_latitude", c.landscape_max_latitude);
  }
  get(j, "arms", c.arms);
  return c;
}

ExperimentConfig load_config(const fs::path& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, base);
}

std::string config_to_json(const ExperimentConfig& c) {
  const TrainingConfig& t = c.training;
  json j = {
      {"mode", to_string(c.mode)},
      {"seed", c.seed},
      {"scenes", c.scenes},
      {"scene",
       {{"primitives", c.gt_primitives}, {"extent", c.extent}, {"file", c.scene_file},
        {"appearance", to_string(c.appearance)}}},
      {"fit", {{"primitives", c.fit_primitives}, {"init_scale", c.init_scale}}},
      {"camera",
       {{"resolution", c.rig.resolution}, {"radius", c.rig.radius}, {"focal_scale", c.rig.focal_scale},
        {"max_abs_z", c.rig.max_abs_z}}},
      {"views",
       {{"pool", c.pool_size}, {"test", c.test_views}, {"initial", c.initial_views}, {"train", c.train_views},
        {"ablation", c.ablation_views}, {"light_cameras", c.light_cameras}, {"test_lights", c.test_lights}}},
      {"rounds", c.rounds},
      {"training",
       {{"samples_per_iteration", t.samples_per_iteration}, {"volume_weight", t.volume_weight},
        {"volume_period", t.volume_period}, {"iterations_per_view", t.iterations_per_view},
        {"iterations_per_light", t.iterations_per_light}, {"total_iterations", t.total_iterations},
        {"ssim_weight", t.ssim_weight}, {"mean_lr", rates_json(t.mean_lr)}, {"raw_lr", rates_json(t.raw_lr)},
        {"densify_interval", t.densify_interval}, {"freeze_generator", t.freeze_generator},
        {"densify",
         {{"gradient", std::isinf(t.densify.gradient) ? json(nullptr) : json(t.densify.gradient)},
          {"clone_max_scale", t.densify.clone_max_scale}, {"split_shrink", t.densify.split_shrink}}}}},
      {"generator",
       {{"variant", c.generator.variant}, {"rank", c.generator.rank}, {"eps0", c.generator.eps0},
        {"max_block", c.generator.max_block}}},
      {"uncertainty", {{"samples", c.uncertainty.samples}}},
      {"view_optimization",
       {{"steps", c.view_optimization.steps}, {"learning_rate", c.view_optimization.learning_rate},
        {"optimize_radius", c.view_optimization.optimize_radius}, {"min_radius", c.view_optimization.min_radius},
        {"max_latitude", c.view_optimization.max_latitude}}},
      {"light_optimization",
       {{"steps", c.light_optimization.steps}, {"learning_rate", c.light_optimization.learning_rate}}},
      {"landscape",
       {{"lat_cells", c.landscape_lat}, {"lon_cells", c.landscape_lon},
        {"max_latitude", c.landscape_max_latitude}}},
      {"arms", c.arms},
      {"checkpoint", c.checkpoint},
      {"output", c.output.string()},
      {"write_images", c.write_images}};
  // An infinite densify threshold (never densify) is written as null.
  if (j["training"]["densify"]["gradient"].is_null()) j["training"]["densify"].erase("gradient");
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Report

bool ExperimentReport::all_ok() const {
  return std::all_of(arms.begin(), arms.end(), [](const ArmStatus& a) { return a.ok; });
}

std::optional<double> ExperimentReport::find(const std::string& metric, const std::string& arm, int round,
                                             int scene) const {
  for (const MetricRow& r : metrics)
    if (r.scene == scene && r.round == round && r.arm == arm && r.metric == metric) return r.value;
  return std::nullopt;
}

std::vector<double> ExperimentReport::per_scene(const std::string& metric, const std::string& arm,
                                                int round) const {
  std::vector<std::pair<int, double>> v;
  for (const MetricRow& r : metrics)
    if (r.scene >= 0 && r.round == round && r.arm == arm && r.metric == metric) v.emplace_back(r.scene, r.value);
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> out;
  for (const auto& p : v) out.push_back(p.second);
  return out;
}

std::uint64_t scene_seed(std::uint64_t base, int k) { return mix(base, 1000 + static_cast<std::uint64_t>(k)); }

std::vector<std::size_t> spread_indices(std::size_t pool_size, std::size_t count) {
  if (count == 0 || count > pool_size) throw ConfigError("spread_indices: count must be in [1, pool size]");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back((2 * i + 1) * pool_size / (2 * count));
  return out;
}

std::vector<fs::path> render_report_figures(const ExperimentReport& report, const fs::path& dir) {
  if (report.metrics.empty()) throw ConfigError("render_report_figures: empty report");
  std::vector<std::string> order;
  for (const MetricRow& r : report.metrics)
    if (r.scene == -1 && std::find(order.begin(), order.end(), r.metric) == order.end()) order.push_back(r.metric);
  std::vector<fs::path> out;
  for (const std::string& m : order) {
    const fs::path p = dir / (m + ".csv");
    CsvWriter csv(p, {"round", "arm", "value"});
    for (const MetricRow& r : report.metrics) {
      if (r.scene != -1 || r.metric != m) continue;
      csv.cell(r.round).cell(r.arm).cell(r.value);
      csv.end_row();
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

TestMetrics evaluate_views(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                           const std::vector<TrainingView>& test, const Scene* ground_truth,
                           const UncertaintyOptions& options, bool deterministic) {
  if (test.empty()) throw ConfigError("evaluate_views: no test views");
  const SceneView mean{gen.mean(), layout, background};
  TestMetrics m;
  std::vector<double> err, unc;
  for (const TrainingView& v : test) {
    const RenderOutput r = render(mean, v.camera, v.light, options.render);
    m.psnr += psnr(r.color, v.target) / static_cast<double>(test.size());
    m.ssim += ssim(r.color, v.target) / static_cast<double>(test.size());
    if (!ground_truth || deterministic) continue;
    const DepthTarget gt = ground_truth_depth(*ground_truth, v.camera, v.light);
    const UncertaintyEstimate u = render_uncertainty(gen, layout, background, v.camera, v.light, options);
    for (std::size_t p = 0; p < gt.alpha.size(); ++p) {
      if (gt.alpha[p] <= 0.5) continue;
      err.push_back(std::abs(r.depth[p] - gt.depth[p]));
      unc.push_back(u.variance[p]);
    }
  }
  if (ground_truth && !deterministic) m.ause = err.empty() ? 0.0 : ause(err, unc).score;
  return m;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

struct SceneSetup {
  int index = 0;
  std::uint64_t seed = 0;
  Scene gt;
  std::vector<Camera> pool;
  std::vector<ShCoeffs> test_lights;
  std::vector<TrainingView> test;
  FlatScene init;
  fs::path dir;
};

std::vector<ShCoeffs> make_test_lights(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ShCoeffs> out;
  for (int i = 0; i < count; ++i) {
    const Vec3 d(normal(rng), normal(rng), normal(rng));
    IlluminationCondition l;
    l.coeffs = lobe_light(d, uniform(rng, 2.0, 8.0), uniform(rng, 0.2, 0.5));
    l.normalize();
    out.push_back(l.coeffs);
  }
  return out;
}

SceneSetup prepare_scene(const ExperimentConfig& cfg, int k, AppearanceMode mode) {
  SceneSetup s;
  s.index = k;
  s.seed = scene_seed(cfg.seed, k);
  s.dir = cfg.output / ("scene" + std::to_string(k));
  GroundTruth gt = generate_scene(s.seed, std::max<std::size_t>(cfg.gt_primitives, 1), cfg.extent, mode, cfg.rig,
                                  cfg.pool_size, cfg.test_views);
  if (!cfg.scene_file.empty()) {
    gt.scene = load_scene(cfg.scene_file);
    if (gt.scene.mode != mode) throw ConfigError("scene file appearance does not match the experiment");
  }
  s.gt = std::move(gt.scene);
  s.pool = std::move(gt.pool);
  s.init = flatten(random_point_cloud(mix(s.seed, kTagInit), cfg.fit_primitives, cfg.extent, mode, cfg.init_scale));
  if (mode == AppearanceMode::Transfer) {
    s.test_lights = make_test_lights(cfg.test_lights, mix(s.seed, kTagTestLights));
    s.test = synthesize_dataset(s.gt, gt.test, s.test_lights);
  } else {
    s.test = synthesize_dataset(s.gt, gt.test);
  }
  return s;
}

TrainingView capture(const Scene& gt, const Camera& camera, std::span<const double> light, std::string label) {
  std::vector<double> l(light.begin(), light.end());
  ImageBuffer img = render(gt, camera, l).color;
  return {camera, std::move(l), std::move(img), std::move(label)};
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg) {}

  ExperimentReport run();

 private:
  Trainer make_trainer(const SceneSetup& s, const GeneratorSpec& spec) const;
  UncertaintyOptions uncertainty_options(const SceneSetup& s) const;
  void metric(int scene, int round, const std::string& arm, const std::string& name, double value);
  void arm(const SceneSetup& s, const std::string& name, const std::function<void()>& body);
  void test_metrics(const SceneSetup& s, const Trainer& t, const std::string& arm, int round, bool with_ause);
  void written(const fs::path& p) { report_.files.push_back(p); }

  void fit_or_eval(const SceneSetup& s);
  void plan_views(const SceneSetup& s, const std::string& arm_name);
  void plan_lights(const SceneSetup& s, const std::string& arm_name);
  void landscape(const SceneSetup& s, const std::string& arm_name);
  void ablate(const SceneSetup& s, const std::string& arm_name);
  void write_outputs();

  const ExperimentConfig& cfg_;
  ExperimentReport report_;
};

Trainer Runner::make_trainer(const SceneSetup& s, const GeneratorSpec& spec) const {
  TrainingConfig tc = cfg_.training;
  tc.seed = mix(s.seed, kTagLatent);
  tc.record_timing = false;
  tc.freeze_generator = tc.freeze_generator || spec.deterministic();
  return Trainer(spec.build(s.init.theta, s.init.layout, mix(s.seed, kTagSigns)), s.init.layout, s.gt.background,
                 tc);
}

UncertaintyOptions Runner::uncertainty_options(const SceneSetup& s) const {
  UncertaintyOptions o = cfg_.uncertainty;
  o.latent_seed = mix(s.seed, kTagLatent);
  return o;
}

void Runner::metric(int scene, int round, const std::string& arm, const std::string& name, double value) {
  report_.metrics.push_back({scene, round, arm, name, value});
}

void Runner::arm(const SceneSetup& s, const std::string& name, const std::function<void()>& body) {
  try {
    body();
    report_.arms.push_back({s.index, name, true, ""});
  } catch (const std::exception& e) {
    std::cerr << "error: scene " << s.index << " arm " << name << ": " << e.what() << "\n";
    report_.arms.push_back({s.index, name, false, e.what()});
  }
}

void Runner::test_metrics(const SceneSetup& s, const Trainer& t, const std::string& arm, int round,
                          bool with_ause) {
  const bool det = t.config().freeze_generator;
  const TestMetrics m = evaluate_views(t.generator(), t.layout(), t.background(), s.test,
                                       with_ause ? &s.gt : nullptr, uncertainty_options(s), det);
  metric(s.index, round, arm, "psnr", m.psnr);
  metric(s.index, round, arm, "ssim", m.ssim);
  if (m.ause) metric(s.index, round, arm, "ause", *m.ause);
}

// fit: train on spread pool views; eval: additionally (or only, with a
// checkpoint) evaluates and writes images.
void Runner::fit_or_eval(const SceneSetup& s) {
  const std::string name = cfg_.arms.front();
  arm(s, name, [&] {
    const fs::path dir = s.dir / name;
    std::optional<Trainer> trainer;
    std::vector<TrainingView> train_set;
    const bool light = cfg_.appearance == AppearanceMode::Transfer;
    const ShCoeffs dc = IlluminationCondition::dc_only().coeffs;
    for (std::size_t idx : spread_indices(s.pool.size(), static_cast<std::size_t>(cfg_.train_views)))
      train_set.push_back(capture(s.gt, s.pool[idx], light ? std::span<const double>(dc) : std::span<const double>(),
                                  "pool" + std::to_string(idx)));

    ManifoldGenerator gen = ManifoldGenerator::low_rank(s.init.theta, 1, 0, 1e-3);
    ParamLayout layout = s.init.layout;
    Vec3 background = s.gt.background;
    bool det = cfg_.generator.deterministic();
    if (cfg_.mode == ExperimentMode::Eval && !cfg_.checkpoint.empty()) {
      GeneratorCheckpoint ck = load_generator(cfg_.checkpoint);
      if (ck.layout.mode() != cfg_.appearance) throw ConfigError("checkpoint appearance does not match the config");
      gen = std::move(ck.generator);
      layout = ck.layout;
      background = ck.background;
      det = false;
    } else {
      trainer.emplace(make_trainer(s, cfg_.generator));
      for (const TrainingView& v : train_set) trainer->add_view(v);
      const auto t0 = std::chrono::steady_clock::now();
      trainer->run(cfg_.training.total_iterations);
      report_.timing["scene" + std::to_string(s.index) + "/" + name + "/ms_per_iteration"] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
          cfg_.training.total_iterations;
      trainer->log().write_csv(dir / "train_log.csv");
      written(dir / "train_log.csv");
      gen = trainer->generator();
      save_generator({gen, layout, background}, dir / "generator.json");
      written(dir / "generator.json");
    }
    save_scene(s.gt, s.dir / "ground_truth.json");
    written(s.dir / "ground_truth.json");

    // Training fidelity of the mean and of the latent corners (m <= 4).
    auto train_psnr = [&](std::span<const double> theta) {
      double p = 0.0;
      for (const TrainingView& v : train_set)
        p += psnr(render(SceneView{theta, layout, background}, v.camera, v.light).color, v.target) /
             static_cast<double>(train_set.size());
      return p;
    };
    const double mean_psnr = train_psnr(gen.mean());
    metric(s.index, 0, name, "train_psnr_mean", mean_psnr);
    if (!det && gen.latent_dim() <= 4) {
      const std::size_t m = gen.latent_dim();
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t corner = 0; corner < (std::size_t{1} << m); ++corner) {
        std::vector<double> z(m);
        for (std::size_t d = 0; d < m; ++d) z[d] = (corner >> d) & 1 ? 1.0 : -1.0;
        const double p = train_psnr(gen.sample(z));
        metric(s.index, 0, name, "train_psnr_corner" + std::to_string(corner), p);
        worst = std::min(worst, p);
      }
      metric(s.index, 0, name, "train_psnr_corner_min", worst);
      metric(s.index, 0, name, "corner_gap_max", mean_psnr - worst);
    }

    const UncertaintyOptions uo = uncertainty_options(s);
    const TestMetrics tm = evaluate_views(gen, layout, background, s.test, &s.gt, uo, det);
    metric(s.index, 0, name, "psnr", tm.psnr);
    metric(s.index, 0, name, "ssim", tm.ssim);
    if (tm.ause) metric(s.index, 0, name, "ause", *tm.ause);

    if (cfg_.mode == ExperimentMode::Eval && cfg_.write_images) {
      for (std::size_t i = 0; i < s.test.size(); ++i) {
        const TrainingView& v = s.test[i];
        const RenderOutput r = render(SceneView{gen.mean(), layout, background}, v.camera, v.light);
        const fs::path p = dir / ("test" + std::to_string(i) + "_mean.ppm");
        write_ppm(r.color, p);
        written(p);
        if (det) continue;
        const UncertaintyEstimate u = render_uncertainty(gen, layout, background, v.camera, v.light, uo);
        const double peak = std::max(*std::max_element(u.variance.begin(), u.variance.end()), 1e-300);
        ImageBuffer map(v.camera.width, v.camera.height);
        for (std::size_t p = 0; p < u.variance.size(); ++p) {
          const Vec3 c = landscape_colormap(u.variance[p] / peak);
          for (int ch = 0; ch < 3; ++ch) map.data[3 * p + ch] = c[ch];
        }
        const fs::path q = dir / ("test" + std::to_string(i) + "_uncertainty.ppm");
        write_ppm(map, q);
        written(q);
      }
    }
  });
}

void Runner::plan_views(const SceneSetup& s, const std::string& name) {
  arm(s, name, [&] {
    const fs::path dir = s.dir / name;
    Trainer trainer = make_trainer(s, cfg_.generator);
    const UncertaintyOptions uo = uncertainty_options(s);
    CandidatePool pool(s.pool);
    std::vector<Vec3> captured;  // off-pool cameras, for farthest-point distances
    for (std::size_t idx : spread_indices(pool.size(), static_cast<std::size_t>(cfg_.initial_views))) {
      pool.choose(idx);
      trainer.add_view(capture(s.gt, pool.cameras[idx], {}, "pool" + std::to_string(idx)), "initial");
    }
    Rng rng(mix(s.seed, kTagRandomArm));
    Rng camera_rng(mix(s.seed, kTagRandomCamera));
    std::vector<PlannerDecision> decisions;

    auto random_pick = [&](const Trainer&, int round) -> std::optional<std::vector<TrainingView>> {
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (!pool.chosen[i]) open.push_back(i);
      if (open.empty()) return std::nullopt;
      const std::size_t idx = open[uniform_index(rng, open.size())];
      pool.choose(idx);
      decisions.push_back({round, "random", static_cast<long long>(idx), pool.cameras[idx].latitude,
                           pool.cameras[idx].longitude, std::numeric_limits<double>::quiet_NaN(), 0});
      return std::vector<TrainingView>{capture(s.gt, pool.cameras[idx], {}, "pool" + std::to_string(idx))};
    };

    PlannerHook planner = [&](const Trainer& t, int round) -> std::optional<std::vector<TrainingView>> {
      if (name == "random") return random_pick(t, round);
      if (name == "farthest") {
        const std::size_t idx = farthest_point_select(pool, captured);
        pool.choose(idx);
        decisions.push_back({round, name, static_cast<long long>(idx), pool.cameras[idx].latitude,
                             pool.cameras[idx].longitude, std::numeric_limits<double>::quiet_NaN(), 0});
        return std::vector<TrainingView>{capture(s.gt, pool.cameras[idx], {}, "pool" + std::to_string(idx))};
      }
      Camera init;
      long long idx = -1;
      double u = 0.0;
      if (name == "opt-random") {
        const double lim = std::sin(cfg_.view_optimization.max_latitude);
        init = pool.cameras.front();
        init.latitude = std::asin(uniform(camera_rng, -lim, lim));
        init.longitude = uniform(camera_rng, -std::numbers::pi, std::numbers::pi);
      } else {
        const ViewSelection sel = select_next_view(t.generator(), t.layout(), t.background(), pool, {}, uo);
        idx = static_cast<long long>(sel.index);
        u = sel.uncertainty;
        init = pool.cameras[sel.index];
      }
      int steps = 0;
      Camera cam = init;
      if (name != "select") {
        const ViewOptimization o =
            optimize_next_view(t.generator(), t.layout(), t.background(), init, {}, cfg_.view_optimization, uo);
        cam = o.camera;
        u = o.uncertainty;
        steps = o.best_step;
        captured.push_back(cam.position());
      }
      metric(s.index, round, name, "u_selected", u);
      decisions.push_back({round, name, idx, cam.latitude, cam.longitude, u, steps});
      const std::string label = name == "select" ? "pool" + std::to_string(idx) : "optimized" + std::to_string(round);
      return std::vector<TrainingView>{capture(s.gt, cam, {}, label)};
    };

    train(trainer, {cfg_.rounds, cfg_.training.iterations_per_view}, planner, random_pick,
          [&](const Trainer& t, int round) {
            if (round > 0) test_metrics(s, t, name, round, true);
          });
    trainer.log().write_csv(dir / "train_log.csv");
    write_decisions_csv(decisions, dir / "decisions.csv");
    written(dir / "train_log.csv");
    written(dir / "decisions.csv");
  });
}

void Runner::plan_lights(const SceneSetup& s, const std::string& name) {
  arm(s, name, [&] {
    const fs::path dir = s.dir / name;
    Trainer trainer = make_trainer(s, cfg_.generator);
    const UncertaintyOptions uo = uncertainty_options(s);
    std::vector<Camera> probes;
    for (std::size_t idx : spread_indices(s.pool.size(), static_cast<std::size_t>(cfg_.light_cameras)))
      probes.push_back(s.pool[idx]);
    std::array<bool, kShBasis> used{};
    used[0] = true;
    std::vector<NamedLight> library{{"train0", IlluminationCondition::dc_only().coeffs}};
    std::vector<PlannerDecision> decisions;
    auto views_under = [&](const ShCoeffs& light, int round) {
      std::vector<TrainingView> v;
      for (std::size_t c = 0; c < probes.size(); ++c)
        v.push_back(capture(s.gt, probes[c], light, "cam" + std::to_string(c) + "/light" + std::to_string(round)));
      return v;
    };
    for (TrainingView& v : views_under(library[0].coeffs, 0)) trainer.add_view(std::move(v), "initial");

    Rng rng(mix(s.seed, kTagRandomArm));
    auto random_pick = [&](const Trainer&, int round) -> std::optional<std::vector<TrainingView>> {
      std::vector<int> open;
      for (int k = 0; k < kShBasis; ++k)
        if (!used[k]) open.push_back(k);
      if (open.empty()) return std::nullopt;
      const int k = open[uniform_index(rng, open.size())];
      used[k] = true;
      const ShCoeffs light = IlluminationCondition::one_hot(k).coeffs;
      library.push_back({"train" + std::to_string(round), light});
      decisions.push_back({round, "random", k, 0.0, 0.0, std::numeric_limits<double>::quiet_NaN(), 0});
      return views_under(light, round);
    };
    PlannerHook planner = [&](const Trainer& t, int round) -> std::optional<std::vector<TrainingView>> {
      if (name == "random") return random_pick(t, round);
      const LightSelection sel = select_next_illumination(t.generator(), t.layout(), t.background(), probes, used, uo);
      used[sel.index] = true;
      IlluminationCondition light = IlluminationCondition::one_hot(sel.index);
      double u = sel.uncertainty;
      int steps = 0;
      if (name == "optimize") {
        const LightOptimization o = optimize_next_illumination(t.generator(), t.layout(), t.background(), light,
                                                               probes, cfg_.light_optimization, uo);
        light = o.light;
        u = o.uncertainty;
        steps = o.best_step;
      }
      metric(s.index, round, name, "u_selected", u);
      library.push_back({"train" + std::to_string(round), light.coeffs});
      decisions.push_back({round, name, sel.index, 0.0, 0.0, u, steps});
      return views_under(light.coeffs, round);
    };
    train(trainer, {cfg_.rounds, cfg_.training.iterations_per_light}, planner, random_pick,
          [&](const Trainer& t, int round) {
            if (round > 0) test_metrics(s, t, name, round, false);
          });
    trainer.log().write_csv(dir / "train_log.csv");
    write_decisions_csv(decisions, dir / "decisions.csv");
    write_illumination_library(library, dir / "lights.csv");
    written(dir / "train_log.csv");
    written(dir / "decisions.csv");
    written(dir / "lights.csv");
    if (cfg_.write_images && s.index == 0) {
      const SceneView mean = trainer.mean_view();
      for (std::size_t i = 0; i < s.test.size(); ++i) {
        const fs::path p = dir / ("relit_" + std::to_string(i) + ".ppm");
        write_ppm(render(mean, s.test[i].camera, s.test[i].light).color, p);
        written(p);
      }
    }
  });
}

void Runner::landscape(const SceneSetup& s, const std::string& name) {
  arm(s, name, [&] {
    const fs::path dir = s.dir / name;
    Trainer trainer = make_trainer(s, GeneratorSpec::parse(name, cfg_.generator));
    const UncertaintyOptions uo = uncertainty_options(s);
    CandidatePool pool(s.pool);
    const std::vector<std::size_t> initial =
        spread_indices(pool.size(), static_cast<std::size_t>(cfg_.initial_views));
    for (std::size_t idx : initial) {
      pool.choose(idx);
      trainer.add_view(capture(s.gt, pool.cameras[idx], {}, "pool" + std::to_string(idx)));
    }
    trainer.run(cfg_.training.total_iterations);
    trainer.log().write_csv(dir / "train_log.csv");
    written(dir / "train_log.csv");
    const ManifoldGenerator& g = trainer.generator();

    const Camera& train_cam = pool.cameras[initial.front()];
    const Landscape l = uncertainty_landscape(g, trainer.layout(), trainer.background(), train_cam, {},
                                              cfg_.landscape_lat, cfg_.landscape_lon,
                                              cfg_.landscape_max_latitude, uo);
    write_landscape_csv(l, dir / "landscape.csv");
    write_landscape_ppm(l, dir / "landscape.ppm");
    written(dir / "landscape.csv");
    written(dir / "landscape.ppm");
    metric(s.index, 0, name, "roughness", landscape_roughness(l));

    // U at the first training view against the grid cells facing away from it.
    const double u_train = render_uncertainty(g, trainer.layout(), trainer.background(), train_cam, {}, uo).total;
    const Vec3 d = train_cam.position().normalized();
    double far = 0.0;
    int far_n = 0;
    for (int r = 0; r < l.lat_cells; ++r) {
      for (int c = 0; c < l.lon_cells; ++c) {
        Camera cell = train_cam;
        cell.latitude = l.latitude[r];
        cell.longitude = l.longitude[c];
        if (cell.position().normalized().dot(d) < 0.0) {
          far += l.values[static_cast<std::size_t>(r) * l.lon_cells + c];
          ++far_n;
        }
      }
    }
    const double far_mean = far_n > 0 ? far / far_n : 0.0;
    metric(s.index, 0, name, "u_train_view", u_train);
    metric(s.index, 0, name, "u_antipodal_mean", far_mean);
    metric(s.index, 0, name, "polarity_ratio", far_mean > 0.0 ? u_train / far_mean : 0.0);

    // Optimization from a random start against the brute-force pool maximum.
    CandidatePool probe = pool;
    const ViewSelection best = select_next_view(g, trainer.layout(), trainer.background(), probe, {}, uo);
    Rng camera_rng(mix(s.seed, kTagRandomCamera));
    const double lim = std::sin(cfg_.view_optimization.max_latitude);
    Camera init = train_cam;
    init.latitude = std::asin(uniform(camera_rng, -lim, lim));
    init.longitude = uniform(camera_rng, -std::numbers::pi, std::numbers::pi);
    const ViewOptimization o =
        optimize_next_view(g, trainer.layout(), trainer.background(), init, {}, cfg_.view_optimization, uo);
    metric(s.index, 0, name, "pool_max_u", best.uncertainty);
    metric(s.index, 0, name, "opt_random_u", o.uncertainty);
    metric(s.index, 0, name, "opt_random_ratio", best.uncertainty > 0.0 ? o.uncertainty / best.uncertainty : 0.0);
    CsvWriter traj(dir / "trajectory.csv", {"step", "lat", "lon", "U"});
    for (const ViewOptimizationStep& st : o.trajectory) {
      traj.cell(st.step).cell(st.camera.latitude).cell(st.camera.longitude).cell(st.uncertainty);
      traj.end_row();
    }
    written(dir / "trajectory.csv");
  });
}

void Runner::ablate(const SceneSetup& s, const std::string& name) {
  arm(s, name, [&] {
    const fs::path dir = s.dir / name;
    const GeneratorSpec spec = GeneratorSpec::parse(name, cfg_.generator);
    Trainer trainer = make_trainer(s, spec);
    for (std::size_t idx : spread_indices(s.pool.size(), static_cast<std::size_t>(cfg_.ablation_views)))
      trainer.add_view(capture(s.gt, s.pool[idx], {}, "pool" + std::to_string(idx)));
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run(cfg_.training.total_iterations);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report_.timing["scene" + std::to_string(s.index) + "/" + name + "/ms_per_iteration"] =
        ms / cfg_.training.total_iterations;
    trainer.log().write_csv(dir / "train_log.csv");
    written(dir / "train_log.csv");
    test_metrics(s, trainer, name, 0, !spec.deterministic());
  });
}

void Runner::write_outputs() {
  // Aggregates over scenes, in first-appearance order.
  std::vector<MetricRow> agg;
  for (const MetricRow& r : report_.metrics) {
    auto it = std::find_if(agg.begin(), agg.end(), [&](const MetricRow& a) {
      return a.round == r.round && a.arm == r.arm && a.metric == r.metric;
    });
    if (it == agg.end()) agg.push_back({-1, r.round, r.arm, r.metric, 0.0});
  }
  for (MetricRow& a : agg) {
    const std::vector<double> v = report_.per_scene(a.metric, a.arm, a.round);
    double sum = 0.0;
    for (double x : v) sum += x;
    a.value = sum / static_cast<double>(v.size());
  }
  report_.metrics.insert(report_.metrics.end(), agg.begin(), agg.end());

  const fs::path& out = cfg_.output;
  fs::create_directories(out);
  {
    std::ofstream f(out / "config.json");
    f << config_to_json(cfg_);
  }
  written(out / "config.json");
  {
    CsvWriter csv(out / "metrics.csv", {"scene", "round", "arm", "metric", "value"});
    for (const MetricRow& r : report_.metrics) {
      csv.cell(r.scene).cell(r.round).cell(r.arm).cell(r.metric).cell(r.value);
      csv.end_row();
    }
  }
  written(out / "metrics.csv");
  {
    CsvWriter csv(out / "arms.csv", {"scene", "arm", "status", "error"});
    for (const ArmStatus& a : report_.arms) {
      std::string e = a.error;
      std::replace(e.begin(), e.end(), ',', ';');
      std::replace(e.begin(), e.end(), '\n', ' ');
      csv.cell(a.scene).cell(a.arm).cell(a.ok ? "ok" : "failed").cell(e);
      csv.end_row();
    }
  }
  written(out / "arms.csv");
  if (!report_.metrics.empty())
    for (const fs::path& p : render_report_figures(report_, out / "figures")) written(p);
  {
    std::ofstream f(out / "timing.txt");
    for (const auto& [k, v] : report_.timing) f << k << ' ' << format_double(v) << '\n';
  }
  written(out / "timing.txt");
  std::vector<std::string> names;
  for (const fs::path& p : report_.files) names.push_back(fs::relative(p, out).generic_string());
  names.push_back("manifest.txt");
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::ofstream f(out / "manifest.txt");
  for (const std::string& n : names) f << n << '\n';
  report_.files.push_back(out / "manifest.txt");
}

ExperimentReport Runner::run() {
  cfg_.validate();
  report_.mode = cfg_.mode;
  const AppearanceMode mode = cfg_.mode == ExperimentMode::PlanLights ? AppearanceMode::Transfer : cfg_.appearance;
  for (int k = 0; k < cfg_.scenes; ++k) {
    const SceneSetup s = prepare_scene(cfg_, k, mode);
    for (const std::string& a : cfg_.arms) {
      switch (cfg_.mode) {
        case ExperimentMode::Fit:
        case ExperimentMode::Eval: fit_or_eval(s); break;
        case ExperimentMode::PlanViews: plan_views(s, a); break;
        case ExperimentMode::PlanLights: plan_lights(s, a); break;
        case ExperimentMode::Landscape: landscape(s, a); break;
        case ExperimentMode::AblateCovariance: ablate(s, a); break;
      }
      if (cfg_.mode == ExperimentMode::Fit || cfg_.mode == ExperimentMode::Eval) break;
    }
  }
  write_outputs();
  return std::move(report_);
}

}  // namespace

ExperimentReport run(const ExperimentConfig& config) { return Runner(config).run(); }

}  // namespace sgrf
