#pragma once

#include "deplen/seed.hpp"
#include "deplen/types.hpp"

#include <string>
#include <vector>

namespace deplen {

/// Named flat view of one parameter tensor (column-major storage).
template <typename T>
struct TensorView {
  std::string name;
  T* data = nullptr;
  std::ptrdiff_t rows = 0;
  std::ptrdiff_t cols = 0;

  std::ptrdiff_t size() const { return rows * cols; }
};

/// Weights of one recurrent layer. Gate blocks are stacked along the rows:
/// (r, z, n) for GRU and (i, f, g, o) for LSTM, each block `hidden` rows tall.
template <typename T>
struct LayerParams {
  Mat<T> w_ih;  // (G*H) x input width
  Mat<T> w_hh;  // (G*H) x H
  Vec<T> b_ih;  // G*H
  Vec<T> b_hh;  // G*H
};

template <typename T>
struct StackParams {
  CellType cell = CellType::kRnn;
  int hidden = 0;
  std::vector<LayerParams<T>> layers;

  int input_width() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w_ih.cols()); }
};

/// All-zero parameters with the shapes of `arch`; also the gradient record.
template <typename T>
StackParams<T> zero_stack(const Architecture& arch, int input_width = 1);

template <typename T>
StackParams<T> zeros_like(const StackParams<T>& params);

/// Every entry i.i.d. uniform on [-1/sqrt(H), 1/sqrt(H)].
template <typename T>
StackParams<T> init_stack(const Architecture& arch, Rng& rng, int input_width = 1);

template <typename T>
std::vector<TensorView<T>> tensor_views(StackParams<T>& params);
template <typename T>
std::vector<TensorView<const T>> tensor_views(const StackParams<T>& params);

/// Recurrent state for one layer over a batch: H x B. `cell` is only used by LSTM.
template <typename T>
struct CellState {
  Mat<T> hidden;
  Mat<T> cell;
};

template <typename T>
CellState<T> zero_state(CellType cell, int hidden, int batch);

/// One recurrence step for a batch of inputs `x` (input width x B).
template <typename T>
CellState<T> cell_step(CellType cell, const LayerParams<T>& params, const Mat<T>& x,
                       const CellState<T>& state);

template <typename T>
struct LayerCache {
  Mat<T> gates;          // G*H x N activated gates (GRU, LSTM)
  Mat<T> hidden;         // H x N
  Mat<T> cell;           // H x N (LSTM)
  Mat<T> hidden_affine;  // H x N, W_hn h + b_hn (GRU)
};

template <typename T>
struct StackCache {
  SequenceBatch<T> input;
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct StackOutput {
  SequenceBatch<T> features;  // top layer hidden state at every step, H x N
  StackCache<T> cache;
};

/// Runs the stack over a whole batch of sequences from zero initial state.
template <typename T>
StackOutput<T> stack_forward(const StackParams<T>& params, const SequenceBatch<T>& input);

template <typename T>
struct StackGradients {
  StackParams<T> params;
  Mat<T> input;  // d loss / d input sequence, same shape as the input values
};

/// Full-length backpropagation through time. `grad_features` has the shape of
/// StackOutput::features.values.
template <typename T>
StackGradients<T> stack_backward(const StackParams<T>& params, const StackCache<T>& cache,
                                 const Mat<T>& grad_features);

}  // namespace deplen
