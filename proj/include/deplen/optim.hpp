#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace deplen {

struct AdamConfig {
  double lr = 1e-5;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// A parameter tensor paired with its gradient, both flat and of equal size.
template <typename T>
struct ParamSlot {
  T* value = nullptr;
  const T* grad = nullptr;
  std::size_t size = 0;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with coupled L2 weight decay (the decay term is folded into the
/// gradient before the moment updates).
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update to every slot. Slots must keep the same order and
  /// sizes across calls. Throws NonFiniteGradient, leaving parameters and
  /// state untouched, if any gradient entry is NaN or infinite.
  void step(std::span<const ParamSlot<T>> slots);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace deplen
