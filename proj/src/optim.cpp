#include "deplen/optim.hpp"

#include <cmath>

namespace deplen {

template <typename T>
void Adam<T>::step(std::span<const ParamSlot<T>> slots) {
  if (m_.empty()) {
    m_.reserve(slots.size());
    v_.reserve(slots.size());
    for (const auto& slot : slots) {
      m_.emplace_back(slot.size, T(0));
      v_.emplace_back(slot.size, T(0));
    }
  }
  if (m_.size() != slots.size()) throw std::logic_error("Adam::step: parameter set changed");
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].size != m_[s].size()) throw std::logic_error("Adam::step: parameter size changed");
    for (std::size_t i = 0; i < slots[s].size; ++i) {
      if (!std::isfinite(slots[s].grad[i])) {
        throw NonFiniteGradient("non-finite gradient at step " + std::to_string(step_ + 1));
      }
    }
  }

  ++step_;
  const T beta1 = static_cast<T>(config_.beta1);
  const T beta2 = static_cast<T>(config_.beta2);
  const T decay = static_cast<T>(config_.weight_decay);
  const T eps = static_cast<T>(config_.eps);
  const double t = static_cast<double>(step_);
  const T correction1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
  const T lr = static_cast<T>(config_.lr);

  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& slot = slots[s];
    auto& m = m_[s];
    auto& v = v_[s];
    for (std::size_t i = 0; i < slot.size; ++i) {
      const T g = slot.grad[i] + decay * slot.value[i];
      m[i] = beta1 * m[i] + (T(1) - beta1) * g;
      v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      slot.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace deplen
