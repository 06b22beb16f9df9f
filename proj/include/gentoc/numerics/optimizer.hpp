#pragma once

#include <cstdint>
#include <vector>

#include "gentoc/numerics/tensor.hpp"

namespace gentoc::numerics {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip applied before the update; 0 disables.
  double clip_norm = 0.0;
};

/// Adaptive moment estimation over a ParameterSet. Moment buffers are sized
/// lazily on the first step and must keep matching their parameters.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Throws if any registered parameter has no gradient buffer.
  void step(ParameterSet<T>& params);

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace gentoc::numerics
