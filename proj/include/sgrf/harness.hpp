#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgrf/planner.hpp"
#include "sgrf/relight.hpp"
#include "sgrf/scenes.hpp"
#include "sgrf/trainer.hpp"

namespace sgrf {

enum class ExperimentMode { Fit, PlanViews, PlanLights, Landscape, AblateCovariance, Eval };

std::string to_string(ExperimentMode mode);
ExperimentMode experiment_mode_from_string(const std::string& s);

/// Covariance structure of a fitted model. Names: "deterministic",
/// "diagonal", "block-diagonal", "rank-<k>".
struct GeneratorSpec {
  std::string variant = "low-rank";
  std::size_t rank = 2;
  double eps0 = 1e-3;
  std::size_t max_block = 64;

  std::string name() const;
  static GeneratorSpec parse(const std::string& name);
  static GeneratorSpec parse(const std::string& name, const GeneratorSpec& base);
  ManifoldGenerator build(std::vector<double> mean, const ParamLayout& layout, std::uint64_t seed) const;
  bool deterministic() const { return variant == "deterministic"; }
};

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::Fit;
  std::uint64_t seed = 1;
  int scenes = 1;  ///< scene k uses a seed derived from (seed, k)

  std::size_t gt_primitives = 200;
  double extent = 1.0;
  std::string scene_file;  ///< ground-truth scene JSON instead of a procedural one
  AppearanceMode appearance = AppearanceMode::ShColor;  ///< forced to transfer in plan-lights
  std::size_t fit_primitives = 120;
  double init_scale = 0.08;

  CameraRig rig;
  int pool_size = 20;
  int test_views = 8;
  int initial_views = 1;  ///< plan-views, landscape
  int train_views = 8;    ///< fit, eval
  int ablation_views = 5;
  int light_cameras = 6;  ///< training (and probe) cameras in plan-lights
  int test_lights = 4;
  int rounds = 5;

  /// Iteration counts: iterations_per_view / iterations_per_light per planning
  /// stage, total_iterations for fit, eval, landscape and ablation runs.
  TrainingConfig training;
  GeneratorSpec generator;
  UncertaintyOptions uncertainty;
  ViewOptimizationOptions view_optimization;
  LightOptimizationOptions light_optimization;

  int landscape_lat = 16;
  int landscape_lon = 32;
  double landscape_max_latitude = 1.5;

  /// plan-views: random, farthest, select, opt-select, opt-random.
  /// plan-lights: random, select, optimize.
  /// landscape, ablate-covariance: generator names.
  std::vector<std::string> arms;
  std::string checkpoint;  ///< eval: generator checkpoint to evaluate instead of fitting
  std::filesystem::path output = "out";
  bool write_images = true;

  /// Throws ConfigError when a mode-required field is missing or invalid.
  void validate() const;
};

/// Mode defaults, including the arm list.
ExperimentConfig default_config(ExperimentMode mode);
/// Parses JSON on top of `base`; unknown keys are errors.
ExperimentConfig parse_config(const std::string& json_text, const ExperimentConfig& base);
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base);
std::string config_to_json(const ExperimentConfig& config);

struct MetricRow {
  int scene = 0;  ///< -1: mean over scenes
  int round = 0;
  std::string arm;
  std::string metric;
  double value = 0.0;
};

struct ArmStatus {
  int scene = 0;
  std::string arm;
  bool ok = true;
  std::string error;
};

struct ExperimentReport {
  ExperimentMode mode = ExperimentMode::Fit;
  std::vector<MetricRow> metrics;
  std::vector<ArmStatus> arms;
  /// Wall-clock measurements, "scene<k>/<arm>/<what>" -> value. Kept out of
  /// every CSV so reruns stay byte-identical.
  std::map<std::string, double> timing;
  std::vector<std::filesystem::path> files;

  bool all_ok() const;
  /// Value of a per-scene (scene >= 0) or aggregated (scene = -1) row.
  std::optional<double> find(const std::string& metric, const std::string& arm, int round, int scene = -1) const;
  /// All per-scene values of a metric for an arm and round, ordered by scene.
  std::vector<double> per_scene(const std::string& metric, const std::string& arm, int round) const;
};

/// Seed of scene `k` of an experiment.
std::uint64_t scene_seed(std::uint64_t base, int k);

/// `count` pool indices spread evenly over the Fibonacci ordering.
std::vector<std::size_t> spread_indices(std::size_t pool_size, std::size_t count);

/// Runs the configured mode for every scene and writes metrics.csv,
/// arms.csv, config.json, timing.txt, manifest.txt and per-arm artifacts
/// under config.output. Arm failures are recorded, not thrown.
ExperimentReport run(const ExperimentConfig& config);

/// One CSV per metric, `<dir>/<metric>.csv` with columns round,arm,value,
/// holding the aggregated rows. Returns the paths written.
std::vector<std::filesystem::path> render_report_figures(const ExperimentReport& report,
                                                         const std::filesystem::path& dir);

/// Mean test PSNR/SSIM of the mean realization and (optionally) AUSE of
/// color uncertainty against the depth error.
struct TestMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> ause;
};
TestMetrics evaluate_views(const ManifoldGenerator& gen, const ParamLayout& layout, const Vec3& background,
                           const std::vector<TrainingView>& test, const Scene* ground_truth,
                           const UncertaintyOptions& options, bool deterministic);

}  // namespace sgrf
