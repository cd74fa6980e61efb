#include "sgrf/adam.hpp"

#include <cmath>

#include "sgrf/error.hpp"
#include "sgrf/simd/kernels.hpp"

namespace sgrf {

AdamState::AdamState(std::string group, std::size_t size, double learning_rate, AdamHyper hyper)
    : group_(std::move(group)), hyper_(hyper), m_(size, 0.0), v_(size, 0.0), lr_(size, learning_rate) {}

void AdamState::set_learning_rates(std::vector<double> lr) {
  if (lr.size() != m_.size()) throw DimensionError("adam '" + group_ + "': learning-rate vector has wrong length");
  lr_ = std::move(lr);
}

void AdamState::remap(std::span<const std::size_t> source_index, std::span<const double> new_lr) {
  if (new_lr.size() != source_index.size()) throw DimensionError("adam remap: size mismatch");
  std::vector<double> m(source_index.size(), 0.0), v(source_index.size(), 0.0);
  for (std::size_t i = 0; i < source_index.size(); ++i) {
    if (source_index[i] < m_.size()) {
      m[i] = m_[source_index[i]];
      v[i] = v_[source_index[i]];
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  lr_.assign(new_lr.begin(), new_lr.end());
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("adam '" + group_ + "': expected " + std::to_string(m_.size()) + " parameters, got " +
                         std::to_string(params.size()) + " params / " + std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (std::isnan(grads[i])) {
      std::string where = labeler_ ? labeler_(i) : "index " + std::to_string(i);
      throw NumericError("adam: NaN gradient in parameter group '" + group_ + "' at " + where + " (step " +
                         std::to_string(step_ + 1) + ")");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const simd::AdamCoeffs c{hyper_.beta1, hyper_.beta2, hyper_.eps, 1.0 - std::pow(hyper_.beta1, t),
                           1.0 - std::pow(hyper_.beta2, t)};
  simd::active().adam_update(c, lr_.data(), grads.data(), m_.data(), v_.data(), params.data(), params.size());
}

}  // namespace sgrf
