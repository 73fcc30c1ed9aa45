#pragma once

#include "deplen/cells.hpp"
#include "deplen/seed.hpp"
#include "deplen/types.hpp"
#include "deplen/wavegen.hpp"

#include <vector>

namespace deplen {

inline constexpr int kHeadLinearLayers = 7;
inline constexpr int kHeadWidth = 128;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct Linear {
  Mat<T> weight;  // out x in
  Vec<T> bias;
};

template <typename T>
struct BatchNorm {
  Vec<T> gamma;
  Vec<T> beta;
};

// Tracked for completeness; every forward pass normalizes with batch statistics.
template <typename T>
struct RunningStats {
  Vec<T> mean;
  Vec<T> var;
};

/// Seven linear layers; layers 1-6 are followed by batchnorm and ReLU, layer 7
/// maps to a single logit. `width` is 128 in every real model and only shrinks
/// in tests.
template <typename T>
struct HeadParams {
  int input_width = 0;
  int width = kHeadWidth;
  std::vector<Linear<T>> linear;       // kHeadLinearLayers entries
  std::vector<BatchNorm<T>> norm;      // kHeadLinearLayers - 1 entries
  std::vector<RunningStats<T>> running;
};

template <typename T>
HeadParams<T> init_head(int input_width, Rng& rng, int width = kHeadWidth);

template <typename T>
HeadParams<T> zeros_like(const HeadParams<T>& params);

/// Trainable tensors only (running statistics are excluded).
template <typename T>
std::vector<TensorView<T>> tensor_views(HeadParams<T>& params);
template <typename T>
std::vector<TensorView<const T>> tensor_views(const HeadParams<T>& params);

template <typename T>
struct HeadCache {
  std::vector<Mat<T>> activations;  // [0] = features, [k] = ReLU output of layer k
  std::vector<Mat<T>> normalized;   // x-hat per batchnorm
  std::vector<Vec<T>> mean;
  std::vector<Vec<T>> var;          // biased
  std::vector<Vec<T>> inv_std;
};

template <typename T>
struct HeadOutput {
  RowVec<T> logits;
  HeadCache<T> cache;
};

/// Training-mode evaluation over all columns of `features` (width x N); the N
/// columns form a single normalization population. Requires N >= 2.
template <typename T>
HeadOutput<T> head_forward(const HeadParams<T>& params, const Mat<T>& features);

template <typename T>
struct HeadGradients {
  HeadParams<T> params;
  Mat<T> features;
};

template <typename T>
HeadGradients<T> head_backward(const HeadParams<T>& params, const HeadCache<T>& cache,
                               const RowVec<T>& grad_logits);

template <typename T>
void update_running_stats(HeadParams<T>& params, const HeadCache<T>& cache,
                          T momentum = static_cast<T>(kBatchNormMomentum));

template <typename T>
struct LossResult {
  double loss = 0.0;
  RowVec<T> grad;  // d loss / d logits
};

/// Class-balanced sigmoid cross entropy. Ones are weighted 1/d, zeros
/// 1/(m - d); the sum over time is averaged over the batch. Each per-element
/// log-probability is floored at log(1e-12).
template <typename T>
LossResult<T> weighted_bce(const RowVec<T>& logits, const RowVec<T>& targets, int batch,
                           int duration, int length);

/// 1 where the logit is strictly positive.
template <typename T>
Wave predict(const RowVec<T>& logits);

}  // namespace deplen
