#include "gentoc/numerics/optimizer.hpp"

#include <cmath>

namespace gentoc::numerics {

template <typename T>
void Adam<T>::step(ParameterSet<T>& params) {
  auto& items = params.items();
  if (m_.empty()) {
    m_.resize(items.size());
    v_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      m_[i].assign(items[i].tensor.values.size(), 0.0);
      v_[i].assign(items[i].tensor.values.size(), 0.0);
    }
  }
  if (m_.size() != items.size()) {
    throw NumericsError("adam: parameter count changed between steps");
  }
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = items[i].tensor;
    if (!t.has_grad()) {
      throw NumericsError("adam: parameter '" + items[i].name + "' has no gradient");
    }
    if (m_[i].size() != t.values.size()) {
      throw NumericsError("adam: moment buffer for '" + items[i].name + "' does not match its shape");
    }
    for (const T g : t.grad) norm_sq += static_cast<double>(g) * g;
  }
  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& t = items[i].tensor;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < t.values.size(); ++j) {
      const double g = static_cast<double>(t.grad[j]) * clip;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      if (lr != 0.0) {
        const double update = lr * (m[j] / correction1) / (std::sqrt(v[j] / correction2) + config_.epsilon);
        t.values[j] = static_cast<T>(t.values[j] - update);
      }
      t.grad[j] = T(0);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace gentoc::numerics
