#pragma once

#include "deplen/cells.hpp"
#include "deplen/head.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace deplen {

/// Recurrent stack followed by the fully connected head applied at every step.
template <typename T>
struct ModelParams {
  StackParams<T> stack;
  HeadParams<T> head;
};

template <typename T>
ModelParams<T> init_model(const Architecture& arch, Rng& rng, int head_width = kHeadWidth);

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

/// Stack tensors first, then head tensors; order is stable.
template <typename T>
std::vector<TensorView<T>> tensor_views(ModelParams<T>& params);
template <typename T>
std::vector<TensorView<const T>> tensor_views(const ModelParams<T>& params);

template <typename T>
struct ModelForward {
  StackOutput<T> stack;
  HeadOutput<T> head;

  const RowVec<T>& logits() const { return head.logits; }
};

template <typename T>
ModelForward<T> model_forward(const ModelParams<T>& params, const SequenceBatch<T>& inputs);

template <typename T>
ModelParams<T> model_backward(const ModelParams<T>& params, const ModelForward<T>& forward,
                              const RowVec<T>& grad_logits);

/// JSON checkpoint: architecture fields plus every tensor keyed by name
/// ("layer1.w_ih", "head.linear3.bias", ...), values in column-major order.
template <typename T>
std::string save_checkpoint(const ModelParams<T>& params);

/// Throws std::runtime_error on malformed input or shape mismatch.
template <typename T>
ModelParams<T> load_checkpoint(std::string_view text);

}  // namespace deplen
