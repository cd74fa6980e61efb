#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sgrf {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers and step counter for one parameter group. Learning rates
/// are stored per element so strided groups (one field across all
/// primitives) can share a buffer.
class AdamState {
 public:
  AdamState(std::string group, std::size_t size, double learning_rate, AdamHyper hyper = {});

  void set_learning_rates(std::vector<double> lr);
  /// Labels an element index for NaN diagnostics (e.g. "mean.position[12]").
  void set_labeler(std::function<std::string(std::size_t)> labeler) { labeler_ = std::move(labeler); }

  /// Resizes after densification; new entries get zero moments and `lr`.
  void remap(std::span<const std::size_t> source_index, std::span<const double> new_lr);

  const std::string& group() const { return group_; }
  std::size_t size() const { return m_.size(); }
  std::uint64_t step_count() const { return step_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  std::span<const double> learning_rates() const { return lr_; }

  /// One bias-corrected Adam step (minimization). Throws NumericError naming
  /// the group if any gradient is NaN; parameters are left untouched then.
  void step(std::span<double> params, std::span<const double> grads);

 private:
  std::string group_;
  AdamHyper hyper_;
  std::vector<double> m_, v_, lr_;
  std::uint64_t step_ = 0;
  std::function<std::string(std::size_t)> labeler_;
};

/// Free-function form used by code that owns the state separately.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  state.step(params, grads);
}

}  // namespace sgrf
