#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgrf/adam.hpp"
#include "sgrf/densify.hpp"
#include "sgrf/generator.hpp"
#include "sgrf/renderer.hpp"

namespace sgrf {

/// One learning rate per parameter field.
struct FieldRates {
  double position = 0.0;
  double log_scale = 0.0;
  double rotation = 0.0;
  double opacity = 0.0;
  double appearance = 0.0;

  double get(Field f) const;
};

struct TrainingConfig {
  int samples_per_iteration = 1;  ///< M_train
  double volume_weight = 1.0;     ///< lambda, applied to the mean |B| entry
  int volume_period = 10;
  int iterations_per_view = 2000;
  int iterations_per_light = 7000;
  int total_iterations = 2000;
  double ssim_weight = 0.2;
  FieldRates mean_lr{0.004, 0.01, 0.01, 0.05, 0.02};
  FieldRates raw_lr{0.0005, 0.001, 0.001, 0.005, 0.002};
  std::uint64_t seed = 0;
  /// Wall-clock per iteration in the log; off writes 0 so logs are reproducible.
  bool record_timing = true;
  /// Deterministic baseline: no sampling, no volume term, B stays untouched.
  bool freeze_generator = false;
  /// Densify every this many iterations (0 = never).
  int densify_interval = 0;
  DensifyThresholds densify;
  RenderSettings render;

  /// Throws ConfigError for M_train < 1, volume period < 1 or negative rates.
  void validate() const;
};

struct TrainingView {
  Camera camera;
  std::vector<double> light;  ///< 16 SH coefficients in transfer mode, empty otherwise
  ImageBuffer target;
  std::string label;
};

struct TrainLogRow {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double ms = 0.0;
  std::string event;
};

class TrainLog {
 public:
  void append(TrainLogRow row) { rows_.push_back(std::move(row)); }
  const std::vector<TrainLogRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  /// CSV with header iteration,loss,ms,event.
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<TrainLogRow> rows_;
};

/// Mean ms per iteration over timed iteration rows, skipping the first 10.
/// Throws ConfigError for an empty log or fewer than 100 iterations.
double step_timing_report(const TrainLog& log);

/// Stochastic trainer: one view per iteration (round robin), M_train latent
/// samples per view, volume term every `volume_period` iterations, Adam on the
/// mean and on the raw generating matrix as two groups.
class Trainer {
 public:
  Trainer(ManifoldGenerator generator, ParamLayout layout, Vec3 background, TrainingConfig config);

  /// Appends a view; training continues without touching the optimizer.
  void add_view(TrainingView view, const std::string& event = "");

  /// One iteration. Returns the photometric data term (averaged over the
  /// M_train realizations); the volume term only enters the gradient.
  /// Throws NumericError with iteration context on NaN.
  double step();
  void run(int iterations);

  const ManifoldGenerator& generator() const { return gen_; }
  ManifoldGenerator& generator() { return gen_; }
  const ParamLayout& layout() const { return layout_; }
  const Vec3& background() const { return background_; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<TrainingView>& views() const { return views_; }
  const TrainLog& log() const { return log_; }
  TrainLog& log() { return log_; }
  std::uint64_t iteration() const { return iteration_; }
  std::uint64_t latent_cursor() const { return cursor_; }
  const AdamState& mean_optimizer() const { return mean_opt_; }
  const AdamState& raw_optimizer() const { return raw_opt_; }

  /// Scene view of the mean realization.
  SceneView mean_view() const { return {gen_.mean(), layout_, background_}; }

 private:
  void rebuild_learning_rates();
  void pending_event(const std::string& event);
  std::string densify_now();

  ManifoldGenerator gen_;
  ParamLayout layout_;
  Vec3 background_;
  TrainingConfig config_;
  LatentSequence latent_;
  AdamState mean_opt_;
  AdamState raw_opt_;
  std::vector<TrainingView> views_;
  TrainLog log_;
  std::uint64_t iteration_ = 0;
  std::uint64_t cursor_ = 0;
  std::vector<double> position_grad_;  // per primitive, since the last densify
  std::vector<std::size_t> raw_row_;   // raw entry -> parameter row
  std::string pending_;                // events reported on the next log row
};

/// Row of the parameter vector that each raw generating-matrix entry feeds.
std::vector<std::size_t> raw_entry_rows(const ManifoldGenerator& generator);

/// Produces the views to add at a schedule boundary (one camera, or every
/// probe camera under a new light). Returning nullopt or an empty list, or
/// throwing, counts as a planner failure.
using PlannerHook = std::function<std::optional<std::vector<TrainingView>>(const Trainer&, int round)>;

struct Schedule {
  int rounds = 0;                 ///< number of boundaries (views or lights to add)
  int iterations_per_stage = 0;   ///< iterations before the first boundary and after each
};

/// Trains `iterations_per_stage`, then for each round asks `planner` for a
/// view (falling back to `fallback` on failure, logged) and trains another
/// stage. `after_stage(trainer, round)` runs after every stage (round 0 is the
/// initial one), e.g. for evaluation.
void train(Trainer& trainer, const Schedule& schedule, const PlannerHook& planner, const PlannerHook& fallback,
           const std::function<void(const Trainer&, int)>& after_stage = {});

}  // namespace sgrf
