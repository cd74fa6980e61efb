#include "sgrf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <unordered_map>

#include "sgrf/csv.hpp"
#include "sgrf/error.hpp"
#include "sgrf/loss.hpp"

namespace sgrf {

double FieldRates::get(Field f) const {
  switch (f) {
    case Field::Position: return position;
    case Field::LogScale: return log_scale;
    case Field::Rotation: return rotation;
    case Field::Opacity: return opacity;
    case Field::Appearance: return appearance;
  }
  return 0.0;
}

void TrainingConfig::validate() const {
  if (samples_per_iteration < 1) throw ConfigError("training: samples_per_iteration must be >= 1");
  if (volume_period < 1) throw ConfigError("training: volume_period must be >= 1");
  if (volume_weight < 0.0) throw ConfigError("training: volume_weight must be >= 0");
  if (ssim_weight < 0.0 || ssim_weight > 1.0) throw ConfigError("training: ssim_weight must be in [0, 1]");
  if (densify_interval < 0) throw ConfigError("training: densify_interval must be >= 0");
  for (Field f : kAllFields) {
    if (mean_lr.get(f) < 0.0 || raw_lr.get(f) < 0.0) throw ConfigError("training: learning rates must be >= 0");
  }
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"iteration", "loss", "ms", "event"});
  for (const TrainLogRow& r : rows_) {
    csv.cell(static_cast<long long>(r.iteration)).cell(r.loss).cell(r.ms).cell(r.event);
    csv.end_row();
  }
}

double step_timing_report(const TrainLog& log) {
  if (log.empty()) throw ConfigError("step_timing_report: empty log");
  if (log.rows().size() < 100) throw ConfigError("step_timing_report: need at least 100 timed iterations");
  double sum = 0.0;
  for (std::size_t i = 10; i < log.rows().size(); ++i) sum += log.rows()[i].ms;
  return sum / static_cast<double>(log.rows().size() - 10);
}

std::vector<std::size_t> raw_entry_rows(const ManifoldGenerator& gen) {
  std::vector<std::size_t> rows(gen.raw_size());
  const std::size_t d = gen.dimension();
  switch (gen.variant()) {
    case CovarianceVariant::LowRank:
      for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = k % d;
      break;
    case CovarianceVariant::Diagonal:
      for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = k;
      break;
    case CovarianceVariant::BlockDiagonal:
      for (const GeneratorBlock& b : gen.blocks())
        for (std::size_t k = 0; k < b.size * b.size; ++k) rows[b.storage + k] = b.offset + k / b.size;
      break;
  }
  return rows;
}

namespace {

std::vector<double> field_rates(const ParamLayout& layout, const std::vector<std::size_t>& rows, const FieldRates& r) {
  std::vector<double> lr(rows.size());
  const std::size_t stride = layout.stride();
  std::vector<double> per_field(stride);
  for (std::size_t k = 0; k < stride; ++k) per_field[k] = r.get(layout.field_of(k));
  for (std::size_t i = 0; i < rows.size(); ++i) lr[i] = per_field[rows[i] % stride];
  return lr;
}

std::vector<std::size_t> identity_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

Trainer::Trainer(ManifoldGenerator generator, ParamLayout layout, Vec3 background, TrainingConfig config)
    : gen_(std::move(generator)),
      layout_(layout),
      background_(background),
      config_(std::move(config)),
      latent_(gen_.latent_dim() == 0 ? 1 : gen_.latent_dim(), config_.seed),
      mean_opt_("mean", gen_.dimension(), 0.0),
      raw_opt_("raw", gen_.raw_size(), 0.0) {
  config_.validate();
  if (gen_.dimension() != layout_.dimension()) throw DimensionError("trainer: generator does not match layout");
  rebuild_learning_rates();
  position_grad_.assign(layout_.primitive_count(), 0.0);
}

void Trainer::rebuild_learning_rates() {
  raw_row_ = raw_entry_rows(gen_);
  mean_opt_.set_learning_rates(field_rates(layout_, identity_rows(gen_.dimension()), config_.mean_lr));
  raw_opt_.set_learning_rates(field_rates(layout_, raw_row_, config_.raw_lr));
  const ParamLayout layout = layout_;
  mean_opt_.set_labeler([layout](std::size_t i) { return layout.describe(i); });
  const std::vector<std::size_t> rows = raw_row_;
  raw_opt_.set_labeler([layout, rows](std::size_t i) {
    return "raw entry " + std::to_string(i) + " (" + layout.describe(rows[i]) + ")";
  });
}

void Trainer::add_view(TrainingView view, const std::string& event) {
  if (view.target.width != view.camera.width || view.target.height != view.camera.height) {
    throw DimensionError("trainer: target image does not match its camera");
  }
  if (layout_.mode() == AppearanceMode::Transfer && view.light.size() != static_cast<std::size_t>(kShBasis)) {
    throw ConfigError("trainer: transfer scenes need a light per training view");
  }
  views_.push_back(std::move(view));
  if (!event.empty()) pending_event(event);
}

void Trainer::pending_event(const std::string& event) {
  if (!pending_.empty()) pending_ += ';';
  pending_ += event;
}

double Trainer::step() {
  if (views_.empty()) throw ConfigError("trainer: no training views");
  const auto t0 = std::chrono::steady_clock::now();
  ++iteration_;
  const TrainingView& view = views_[(iteration_ - 1) % views_.size()];
  const bool frozen = config_.freeze_generator;
  const int m = frozen ? 1 : config_.samples_per_iteration;
  const double inv_m = 1.0 / m;

  std::vector<double> d_mean(gen_.dimension(), 0.0), d_raw(gen_.raw_size(), 0.0), theta(gen_.dimension());
  std::vector<double> z(latent_.dimension());
  double loss = 0.0;
  for (int s = 0; s < m; ++s) {
    if (frozen) {
      std::copy(gen_.mean().begin(), gen_.mean().end(), theta.begin());
    } else {
      latent_.point(cursor_++, z);
      gen_.sample(z, theta);
    }
    const SceneView scene{theta, layout_, background_};
    const RenderOutput fwd = render(scene, view.camera, view.light, config_.render);
    PhotometricLoss pl = photometric_loss(fwd.color, view.target, config_.ssim_weight);
    loss += inv_m * pl.value;
    for (double& g : pl.d_rendered.data) g *= inv_m;
    const RenderGradients g = render_backward(scene, view.camera, view.light, fwd, pl.d_rendered, config_.render);
    if (frozen) {
      for (std::size_t i = 0; i < d_mean.size(); ++i) d_mean[i] += g.theta[i];
    } else {
      gen_.sample_backward(z, g.theta, d_mean, d_raw);
    }
  }
  if (std::isnan(loss)) {
    throw NumericError("iteration " + std::to_string(iteration_) + " (view '" + view.label + "'): loss is NaN");
  }

  std::string event = std::move(pending_);
  pending_.clear();
  if (!frozen && config_.volume_weight > 0.0 && iteration_ % static_cast<std::uint64_t>(config_.volume_period) == 0) {
    // The objective subtracts lambda * ||B||_1 / #entries; per-entry scaling keeps
    // lambda independent of scene size.
    const double entries = static_cast<double>(std::max<std::size_t>(gen_.raw().size(), 1));
    gen_.volume_surrogate(d_raw, -config_.volume_weight / entries);
    event += event.empty() ? "volume" : ";volume";
  }

  mean_opt_.step(gen_.mean(), d_mean);
  if (!frozen) raw_opt_.step(gen_.raw(), d_raw);

  if (config_.densify_interval > 0) {
    for (std::size_t i = 0; i < layout_.primitive_count(); ++i) {
      const std::size_t o = layout_.offset(i, Field::Position);
      position_grad_[i] += std::sqrt(d_mean[o] * d_mean[o] + d_mean[o + 1] * d_mean[o + 1] + d_mean[o + 2] * d_mean[o + 2]);
    }
    if (iteration_ % static_cast<std::uint64_t>(config_.densify_interval) == 0) {
      const std::string note = densify_now();
      if (!note.empty()) event += event.empty() ? note : ";" + note;
    }
  }

  double ms = 0.0;
  if (config_.record_timing) {
    ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  log_.append({iteration_, loss, ms, std::move(event)});
  return loss;
}

std::string Trainer::densify_now() {
  const DensifyResult res = densify(gen_, layout_, position_grad_, config_.densify, config_.seed ^ iteration_);
  position_grad_.assign(res.layout.primitive_count(), 0.0);
  if (res.cloned == 0 && res.split == 0) return "";

  // Raw entries continue their old counterparts when the row survives.
  std::vector<std::size_t> raw_source(res.generator.raw_size(), kFreshRow);
  const std::size_t d_old = gen_.dimension(), d_new = res.generator.dimension();
  switch (gen_.variant()) {
    case CovarianceVariant::LowRank:
      for (std::size_t k = 0; k < raw_source.size(); ++k) {
        const std::size_t src = res.row_source[k % d_new];
        if (src != kFreshRow) raw_source[k] = (k / d_new) * d_old + src;
      }
      break;
    case CovarianceVariant::Diagonal:
      for (std::size_t k = 0; k < raw_source.size(); ++k) raw_source[k] = res.row_source[k];
      break;
    case CovarianceVariant::BlockDiagonal: {
      std::unordered_map<std::size_t, std::size_t> storage_of;
      for (const GeneratorBlock& b : gen_.blocks()) storage_of[b.offset] = b.storage;
      for (const GeneratorBlock& b : res.generator.blocks()) {
        const std::size_t src = res.row_source[b.offset];
        if (src == kFreshRow) continue;
        const std::size_t old_storage = storage_of.at(src);
        for (std::size_t k = 0; k < b.size * b.size; ++k) raw_source[b.storage + k] = old_storage + k;
      }
      break;
    }
  }

  gen_ = res.generator;
  layout_ = res.layout;
  raw_row_ = raw_entry_rows(gen_);
  mean_opt_.remap(res.row_source, field_rates(layout_, identity_rows(gen_.dimension()), config_.mean_lr));
  raw_opt_.remap(raw_source, field_rates(layout_, raw_row_, config_.raw_lr));
  rebuild_learning_rates();
  return "densify +" + std::to_string(res.cloned) + " clone +" + std::to_string(res.split) + " split";
}

void Trainer::run(int iterations) {
  for (int i = 0; i < iterations; ++i) step();
}

void train(Trainer& trainer, const Schedule& schedule, const PlannerHook& planner, const PlannerHook& fallback,
           const std::function<void(const Trainer&, int)>& after_stage) {
  trainer.run(schedule.iterations_per_stage);
  if (after_stage) after_stage(trainer, 0);
  for (int round = 1; round <= schedule.rounds; ++round) {
    std::optional<std::vector<TrainingView>> views;
    std::string failure;
    try {
      if (planner) views = planner(trainer, round);
      if (!views || views->empty()) failure = "planner returned nothing";
    } catch (const std::exception& e) {
      failure = e.what();
    }
    std::string event = "add-view round " + std::to_string(round);
    if (!failure.empty()) {
      if (!fallback) throw ConfigError("planner failed in round " + std::to_string(round) + ": " + failure);
      std::cerr << "warning: planner failed in round " << round << " (" << failure << "), using fallback\n";
      views = fallback(trainer, round);
      if (!views || views->empty()) throw ConfigError("fallback planner failed in round " + std::to_string(round));
      event = "planner-fallback round " + std::to_string(round);
    }
    for (std::size_t k = 0; k < views->size(); ++k) trainer.add_view(std::move((*views)[k]), k == 0 ? event : "");
    trainer.run(schedule.iterations_per_stage);
    if (after_stage) after_stage(trainer, round);
  }
}

}  // namespace sgrf
