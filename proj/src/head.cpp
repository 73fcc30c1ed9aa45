#include "deplen/head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deplen {

namespace {

template <typename T>
Linear<T> make_linear(int in, int out, Rng* rng) {
  Linear<T> layer{Mat<T>::Zero(out, in), Vec<T>::Zero(out)};
  if (rng != nullptr) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::ptrdiff_t i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = static_cast<T>(dist(*rng));
    for (std::ptrdiff_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = static_cast<T>(dist(*rng));
  }
  return layer;
}

template <typename T, typename P>
auto views_of(P& params) {
  using Elem = std::conditional_t<std::is_const_v<P>, const T, T>;
  std::vector<TensorView<Elem>> out;
  for (std::size_t k = 0; k < params.linear.size(); ++k) {
    auto& lin = params.linear[k];
    const std::string prefix = "head.linear" + std::to_string(k + 1) + ".";
    out.push_back({prefix + "weight", lin.weight.data(), lin.weight.rows(), lin.weight.cols()});
    out.push_back({prefix + "bias", lin.bias.data(), lin.bias.rows(), 1});
  }
  for (std::size_t k = 0; k < params.norm.size(); ++k) {
    auto& bn = params.norm[k];
    const std::string prefix = "head.norm" + std::to_string(k + 1) + ".";
    out.push_back({prefix + "gamma", bn.gamma.data(), bn.gamma.rows(), 1});
    out.push_back({prefix + "beta", bn.beta.data(), bn.beta.rows(), 1});
  }
  return out;
}

template <typename T>
HeadParams<T> build_head(int input_width, int width, Rng* rng) {
  if (input_width < 1) throw std::invalid_argument("head input width must be >= 1");
  if (width < 1) throw std::invalid_argument("head width must be >= 1");
  HeadParams<T> params;
  params.input_width = input_width;
  params.width = width;
  for (int k = 0; k < kHeadLinearLayers; ++k) {
    const int in = k == 0 ? input_width : width;
    const int out = k == kHeadLinearLayers - 1 ? 1 : width;
    params.linear.push_back(make_linear<T>(in, out, rng));
  }
  for (int k = 0; k < kHeadLinearLayers - 1; ++k) {
    params.norm.push_back({Vec<T>::Ones(width), Vec<T>::Zero(width)});
    params.running.push_back({Vec<T>::Zero(width), Vec<T>::Ones(width)});
  }
  return params;
}

// -log(sigmoid(x)) without overflow.
double softplus_neg(double x) {
  return std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

template <typename T>
HeadParams<T> init_head(int input_width, Rng& rng, int width) {
  return build_head<T>(input_width, width, &rng);
}

template <typename T>
HeadParams<T> zeros_like(const HeadParams<T>& params) {
  HeadParams<T> out = build_head<T>(params.input_width, params.width, nullptr);
  for (auto& bn : out.norm) bn.gamma.setZero();
  return out;
}

template <typename T>
std::vector<TensorView<T>> tensor_views(HeadParams<T>& params) {
  return views_of<T>(params);
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const HeadParams<T>& params) {
  return views_of<T>(params);
}

template <typename T>
HeadOutput<T> head_forward(const HeadParams<T>& params, const Mat<T>& features) {
  if (features.rows() != params.input_width) {
    throw std::logic_error("head_forward: feature width does not match head input");
  }
  const auto N = features.cols();
  if (N < 2) throw std::invalid_argument("head_forward: batch normalization needs at least 2 samples");
  const T eps = static_cast<T>(kBatchNormEps);

  HeadOutput<T> out;
  auto& cache = out.cache;
  cache.activations.reserve(kHeadLinearLayers);
  cache.activations.push_back(features);
  for (int k = 0; k < kHeadLinearLayers - 1; ++k) {
    const auto& lin = params.linear[k];
    const auto& bn = params.norm[k];
    Mat<T> z(lin.weight.rows(), N);
    z.noalias() = lin.weight * cache.activations.back();
    z.colwise() += lin.bias;

    Vec<T> mean = z.rowwise().mean();
    Vec<T> var = Vec<T>::Zero(z.rows());
    for (std::ptrdiff_t c = 0; c < N; ++c) var += (z.col(c) - mean).cwiseAbs2();
    var /= static_cast<T>(N);
    Vec<T> inv_std = (var.array() + eps).rsqrt().matrix();

    Mat<T> xhat(z.rows(), N);
    Mat<T> act(z.rows(), N);
    for (std::ptrdiff_t c = 0; c < N; ++c) {
      xhat.col(c) = (z.col(c) - mean).cwiseProduct(inv_std);
      act.col(c) = (xhat.col(c).cwiseProduct(bn.gamma) + bn.beta).cwiseMax(T(0));
    }
    cache.activations.push_back(std::move(act));
    cache.normalized.push_back(std::move(xhat));
    cache.mean.push_back(std::move(mean));
    cache.var.push_back(std::move(var));
    cache.inv_std.push_back(std::move(inv_std));
  }
  const auto& last = params.linear.back();
  out.logits = last.weight * cache.activations.back();
  out.logits.array() += last.bias[0];
  return out;
}

template <typename T>
HeadGradients<T> head_backward(const HeadParams<T>& params, const HeadCache<T>& cache,
                               const RowVec<T>& grad_logits) {
  const auto N = cache.activations.front().cols();
  if (grad_logits.size() != N) throw std::logic_error("head_backward: gradient length mismatch");

  HeadGradients<T> grads;
  grads.params = zeros_like(params);
  auto& gp = grads.params;

  const auto& last = params.linear.back();
  gp.linear.back().weight.noalias() = grad_logits * cache.activations.back().transpose();
  gp.linear.back().bias[0] = grad_logits.sum();
  Mat<T> grad_act = last.weight.transpose() * grad_logits;

  const T inv_n = T(1) / static_cast<T>(N);
  for (int k = kHeadLinearLayers - 2; k >= 0; --k) {
    const auto& act = cache.activations[k + 1];
    const auto& xhat = cache.normalized[k];
    const auto& bn = params.norm[k];
    const auto width = xhat.rows();

    // grad_act becomes dy (gradient at the batchnorm output) in place.
    Vec<T> sum_dy = Vec<T>::Zero(width);
    Vec<T> sum_dy_xhat = Vec<T>::Zero(width);
    for (std::ptrdiff_t c = 0; c < N; ++c) {
      auto dy = grad_act.col(c);
      dy = dy.cwiseProduct((act.col(c).array() > T(0)).template cast<T>().matrix());
      sum_dy += dy;
      sum_dy_xhat += dy.cwiseProduct(xhat.col(c));
    }
    gp.norm[k].gamma = sum_dy_xhat;
    gp.norm[k].beta = sum_dy;

    // dz = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
    const Vec<T> scale = bn.gamma.cwiseProduct(cache.inv_std[k]);
    const Vec<T> mean_dy = sum_dy * inv_n;
    const Vec<T> mean_dy_xhat = sum_dy_xhat * inv_n;
    Mat<T>& dz = grad_act;
    Vec<T> sum_dz = Vec<T>::Zero(width);
    for (std::ptrdiff_t c = 0; c < N; ++c) {
      dz.col(c) = (dz.col(c) - mean_dy - xhat.col(c).cwiseProduct(mean_dy_xhat)).cwiseProduct(scale);
      sum_dz += dz.col(c);
    }

    gp.linear[k].weight.noalias() = dz * cache.activations[k].transpose();
    gp.linear[k].bias = sum_dz;
    Mat<T> next(params.linear[k].weight.cols(), N);
    next.noalias() = params.linear[k].weight.transpose() * dz;
    grad_act = std::move(next);
  }
  grads.features = std::move(grad_act);
  return grads;
}

template <typename T>
void update_running_stats(HeadParams<T>& params, const HeadCache<T>& cache, T momentum) {
  const auto N = static_cast<T>(cache.activations.front().cols());
  for (std::size_t k = 0; k < params.running.size(); ++k) {
    auto& rs = params.running[k];
    rs.mean = (T(1) - momentum) * rs.mean + momentum * cache.mean[k];
    rs.var = (T(1) - momentum) * rs.var + momentum * cache.var[k] * (N / (N - T(1)));
  }
}

template <typename T>
LossResult<T> weighted_bce(const RowVec<T>& logits, const RowVec<T>& targets, int batch,
                           int duration, int length) {
  if (duration < 1 || length <= duration) throw std::invalid_argument("weighted_bce: need 1 <= d < m");
  if (batch < 1 || logits.size() != static_cast<std::ptrdiff_t>(batch) * length ||
      targets.size() != logits.size()) {
    throw std::invalid_argument("weighted_bce: logits/targets do not match batch x length");
  }
  const double max_term = -std::log(1e-12);
  const double w_one = 1.0 / duration;
  const double w_zero = 1.0 / (length - duration);
  const double inv_batch = 1.0 / batch;

  LossResult<T> out;
  out.grad.resize(logits.size());
  double total = 0.0;
  for (std::ptrdiff_t i = 0; i < logits.size(); ++i) {
    const double x = static_cast<double>(logits[i]);
    const double y = static_cast<double>(targets[i]);
    double term;
    double w;
    if (y == 1.0) {
      term = softplus_neg(x);
      w = w_one;
    } else if (y == 0.0) {
      term = softplus_neg(-x);
      w = w_zero;
    } else {
      throw std::invalid_argument("weighted_bce: targets must be 0 or 1");
    }
    total += w * std::min(term, max_term);
    const double p = 1.0 / (1.0 + std::exp(-x));
    out.grad[i] = static_cast<T>(inv_batch * w * (p - y));
  }
  out.loss = total * inv_batch;
  return out;
}

template <typename T>
Wave predict(const RowVec<T>& logits) {
  Wave out(static_cast<std::size_t>(logits.size()));
  for (std::ptrdiff_t i = 0; i < logits.size(); ++i) out[i] = logits[i] > T(0) ? 1 : 0;
  return out;
}

#define DEPLEN_INSTANTIATE_HEAD(T)                                                              \
  template HeadParams<T> init_head<T>(int, Rng&, int);                                          \
  template HeadParams<T> zeros_like<T>(const HeadParams<T>&);                                   \
  template std::vector<TensorView<T>> tensor_views<T>(HeadParams<T>&);                          \
  template std::vector<TensorView<const T>> tensor_views<T>(const HeadParams<T>&);              \
  template HeadOutput<T> head_forward<T>(const HeadParams<T>&, const Mat<T>&);                  \
  template HeadGradients<T> head_backward<T>(const HeadParams<T>&, const HeadCache<T>&,         \
                                             const RowVec<T>&);                                 \
  template void update_running_stats<T>(HeadParams<T>&, const HeadCache<T>&, T);                \
  template LossResult<T> weighted_bce<T>(const RowVec<T>&, const RowVec<T>&, int, int, int);    \
  template Wave predict<T>(const RowVec<T>&);

DEPLEN_INSTANTIATE_HEAD(float)
DEPLEN_INSTANTIATE_HEAD(double)
DEPLEN_INSTANTIATE_HEAD(long double)

}  // namespace deplen
