#include "deplen/cells.hpp"

#include <cmath>
#include <stdexcept>

namespace deplen {

namespace {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename Derived>
auto sigmoid_of(const Eigen::MatrixBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return x.unaryExpr([](T v) { return sigmoid(v); });
}

template <typename Derived>
auto tanh_of(const Eigen::MatrixBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return x.unaryExpr([](T v) { return std::tanh(v); });
}

template <typename T>
void fill_uniform(Mat<T>& m, T bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (std::ptrdiff_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
void fill_uniform(Vec<T>& v, T bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (std::ptrdiff_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(dist(rng));
}

// Per-step outputs of one layer.
template <typename T>
struct StepResult {
  Mat<T> gates;
  Mat<T> hidden;
  Mat<T> cell;
  Mat<T> hidden_affine;
};

// `input_affine` is W_ih x + b_ih for the step, (G*H) x B.
template <typename T, typename InputAffine>
StepResult<T> advance(CellType cell, const LayerParams<T>& p, const InputAffine& input_affine,
                      const Mat<T>& h_prev, const Mat<T>& c_prev) {
  const auto H = h_prev.rows();
  Mat<T> hh = p.w_hh * h_prev;
  hh.colwise() += p.b_hh;

  StepResult<T> out;
  switch (cell) {
    case CellType::kRnn: {
      out.hidden = tanh_of(input_affine + hh);
      break;
    }
    case CellType::kGru: {
      out.gates.resize(3 * H, h_prev.cols());
      out.gates.topRows(2 * H) = sigmoid_of(input_affine.topRows(2 * H) + hh.topRows(2 * H));
      out.hidden_affine = hh.bottomRows(H);
      const auto r = out.gates.topRows(H);
      out.gates.bottomRows(H) =
          tanh_of(input_affine.bottomRows(H) + r.cwiseProduct(out.hidden_affine));
      const auto z = out.gates.middleRows(H, H);
      const auto n = out.gates.bottomRows(H);
      out.hidden = (Mat<T>::Ones(H, h_prev.cols()) - z).cwiseProduct(n) + z.cwiseProduct(h_prev);
      break;
    }
    case CellType::kLstm: {
      Mat<T> pre = input_affine + hh;
      out.gates.resize(4 * H, h_prev.cols());
      out.gates.topRows(2 * H) = sigmoid_of(pre.topRows(2 * H));
      out.gates.middleRows(2 * H, H) = tanh_of(pre.middleRows(2 * H, H));
      out.gates.bottomRows(H) = sigmoid_of(pre.bottomRows(H));
      const auto i = out.gates.topRows(H);
      const auto f = out.gates.middleRows(H, H);
      const auto g = out.gates.middleRows(2 * H, H);
      const auto o = out.gates.bottomRows(H);
      out.cell = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      out.hidden = o.cwiseProduct(tanh_of(out.cell));
      break;
    }
  }
  return out;
}

template <typename T>
LayerParams<T> zero_layer(CellType cell, int hidden, int input_width) {
  const int rows = gate_count(cell) * hidden;
  return {Mat<T>::Zero(rows, input_width), Mat<T>::Zero(rows, hidden), Vec<T>::Zero(rows),
          Vec<T>::Zero(rows)};
}

template <typename T, typename P>
auto views_of(P& params) {
  using Elem = std::conditional_t<std::is_const_v<P>, const T, T>;
  std::vector<TensorView<Elem>> out;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& layer = params.layers[k];
    const std::string prefix = "layer" + std::to_string(k + 1) + ".";
    out.push_back({prefix + "w_ih", layer.w_ih.data(), layer.w_ih.rows(), layer.w_ih.cols()});
    out.push_back({prefix + "w_hh", layer.w_hh.data(), layer.w_hh.rows(), layer.w_hh.cols()});
    out.push_back({prefix + "b_ih", layer.b_ih.data(), layer.b_ih.rows(), 1});
    out.push_back({prefix + "b_hh", layer.b_hh.data(), layer.b_hh.rows(), 1});
  }
  return out;
}

}  // namespace

template <typename T>
StackParams<T> zero_stack(const Architecture& arch, int input_width) {
  arch.validate();
  if (input_width < 1) throw std::invalid_argument("input width must be >= 1");
  StackParams<T> params;
  params.cell = arch.cell;
  params.hidden = arch.hidden;
  params.layers.reserve(arch.layers);
  for (int k = 0; k < arch.layers; ++k) {
    params.layers.push_back(zero_layer<T>(arch.cell, arch.hidden, k == 0 ? input_width : arch.hidden));
  }
  return params;
}

template <typename T>
StackParams<T> zeros_like(const StackParams<T>& params) {
  StackParams<T> out;
  out.cell = params.cell;
  out.hidden = params.hidden;
  for (const auto& layer : params.layers) {
    out.layers.push_back({Mat<T>::Zero(layer.w_ih.rows(), layer.w_ih.cols()),
                          Mat<T>::Zero(layer.w_hh.rows(), layer.w_hh.cols()),
                          Vec<T>::Zero(layer.b_ih.size()), Vec<T>::Zero(layer.b_hh.size())});
  }
  return out;
}

template <typename T>
StackParams<T> init_stack(const Architecture& arch, Rng& rng, int input_width) {
  StackParams<T> params = zero_stack<T>(arch, input_width);
  const T bound = T(1) / std::sqrt(static_cast<T>(arch.hidden));
  for (auto& layer : params.layers) {
    fill_uniform(layer.w_ih, bound, rng);
    fill_uniform(layer.w_hh, bound, rng);
    fill_uniform(layer.b_ih, bound, rng);
    fill_uniform(layer.b_hh, bound, rng);
  }
  return params;
}

template <typename T>
std::vector<TensorView<T>> tensor_views(StackParams<T>& params) {
  return views_of<T>(params);
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const StackParams<T>& params) {
  return views_of<T>(params);
}

template <typename T>
CellState<T> zero_state(CellType cell, int hidden, int batch) {
  CellState<T> state;
  state.hidden = Mat<T>::Zero(hidden, batch);
  if (cell == CellType::kLstm) state.cell = Mat<T>::Zero(hidden, batch);
  return state;
}

template <typename T>
CellState<T> cell_step(CellType cell, const LayerParams<T>& params, const Mat<T>& x,
                       const CellState<T>& state) {
  const auto H = state.hidden.rows();
  if (params.w_hh.cols() != H || params.w_hh.rows() != gate_count(cell) * H ||
      params.w_ih.cols() != x.rows() || x.cols() != state.hidden.cols()) {
    throw std::logic_error("cell_step: inconsistent shapes");
  }
  Mat<T> input_affine = params.w_ih * x;
  input_affine.colwise() += params.b_ih;
  const Mat<T> c_prev = cell == CellType::kLstm ? state.cell : Mat<T>();
  auto step = advance<T>(cell, params, input_affine, state.hidden, c_prev);
  return {std::move(step.hidden), std::move(step.cell)};
}

template <typename T>
StackOutput<T> stack_forward(const StackParams<T>& params, const SequenceBatch<T>& input) {
  const BatchLayout layout = input.layout;
  if (input.values.cols() != layout.columns()) {
    throw std::logic_error("stack_forward: input column count does not match layout");
  }
  if (params.layers.empty() || input.values.rows() != params.input_width()) {
    throw std::logic_error("stack_forward: input width does not match parameters");
  }
  const int H = params.hidden;
  const int G = gate_count(params.cell);
  const auto N = layout.columns();
  const int B = layout.batch;

  StackOutput<T> out;
  out.cache.input = input;
  out.cache.layers.resize(params.layers.size());

  const Mat<T>* layer_input = &input.values;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& p = params.layers[k];
    auto& cache = out.cache.layers[k];
    cache.hidden.resize(H, N);
    if (params.cell != CellType::kRnn) cache.gates.resize(G * H, N);
    if (params.cell == CellType::kLstm) cache.cell.resize(H, N);
    if (params.cell == CellType::kGru) cache.hidden_affine.resize(H, N);

    Mat<T> input_affine = p.w_ih * (*layer_input);
    input_affine.colwise() += p.b_ih;

    Mat<T> h = Mat<T>::Zero(H, B);
    Mat<T> c = params.cell == CellType::kLstm ? Mat<T>::Zero(H, B) : Mat<T>();
    for (int t = 0; t < layout.steps; ++t) {
      const auto cols = static_cast<std::ptrdiff_t>(t) * B;
      auto step = advance<T>(params.cell, p, input_affine.middleCols(cols, B), h, c);
      cache.hidden.middleCols(cols, B) = step.hidden;
      if (params.cell != CellType::kRnn) cache.gates.middleCols(cols, B) = step.gates;
      if (params.cell == CellType::kGru) cache.hidden_affine.middleCols(cols, B) = step.hidden_affine;
      if (params.cell == CellType::kLstm) {
        cache.cell.middleCols(cols, B) = step.cell;
        c = std::move(step.cell);
      }
      h = std::move(step.hidden);
    }
    layer_input = &cache.hidden;
  }

  out.features.layout = layout;
  out.features.values = out.cache.layers.back().hidden;
  return out;
}

template <typename T>
StackGradients<T> stack_backward(const StackParams<T>& params, const StackCache<T>& cache,
                                 const Mat<T>& grad_features) {
  const BatchLayout layout = cache.input.layout;
  const int H = params.hidden;
  const int G = gate_count(params.cell);
  const auto N = layout.columns();
  const int B = layout.batch;
  if (grad_features.rows() != H || grad_features.cols() != N) {
    throw std::logic_error("stack_backward: gradient shape does not match features");
  }

  StackGradients<T> grads;
  grads.params = zeros_like(params);

  Mat<T> grad_seq = grad_features;
  for (std::size_t kk = params.layers.size(); kk-- > 0;) {
    const auto& p = params.layers[kk];
    const auto& lc = cache.layers[kk];
    const Mat<T>& x = kk == 0 ? cache.input.values : cache.layers[kk - 1].hidden;

    // Gradients w.r.t. the input-side and hidden-side affine terms.
    Mat<T> d_input_affine(G * H, N);
    Mat<T> d_hidden_affine;
    if (params.cell == CellType::kGru) d_hidden_affine.resize(G * H, N);

    Mat<T> h_prev_seq = Mat<T>::Zero(H, N);
    if (N > B) h_prev_seq.rightCols(N - B) = lc.hidden.leftCols(N - B);

    Mat<T> dh_next = Mat<T>::Zero(H, B);
    Mat<T> dc_next = params.cell == CellType::kLstm ? Mat<T>::Zero(H, B) : Mat<T>();
    const Mat<T> ones = Mat<T>::Ones(H, B);

    for (int t = layout.steps - 1; t >= 0; --t) {
      const auto cols = static_cast<std::ptrdiff_t>(t) * B;
      const Mat<T> dh = grad_seq.middleCols(cols, B) + dh_next;
      const auto h_prev = h_prev_seq.middleCols(cols, B);
      auto da = d_input_affine.middleCols(cols, B);

      switch (params.cell) {
        case CellType::kRnn: {
          const auto h = lc.hidden.middleCols(cols, B);
          da = dh.cwiseProduct(ones - h.cwiseProduct(h));
          dh_next = p.w_hh.transpose() * da;
          break;
        }
        case CellType::kGru: {
          const auto gates = lc.gates.middleCols(cols, B);
          const auto r = gates.topRows(H);
          const auto z = gates.middleRows(H, H);
          const auto n = gates.bottomRows(H);
          const auto hn = lc.hidden_affine.middleCols(cols, B);
          const Mat<T> d_n_pre = dh.cwiseProduct(ones - z).cwiseProduct(ones - n.cwiseProduct(n));
          const Mat<T> d_r = d_n_pre.cwiseProduct(hn);
          const Mat<T> d_z = dh.cwiseProduct(h_prev - n);
          da.topRows(H) = d_r.cwiseProduct(r).cwiseProduct(ones - r);
          da.middleRows(H, H) = d_z.cwiseProduct(z).cwiseProduct(ones - z);
          da.bottomRows(H) = d_n_pre;
          auto dha = d_hidden_affine.middleCols(cols, B);
          dha.topRows(2 * H) = da.topRows(2 * H);
          dha.bottomRows(H) = d_n_pre.cwiseProduct(r);
          dh_next = p.w_hh.transpose() * dha + dh.cwiseProduct(z);
          break;
        }
        case CellType::kLstm: {
          const auto gates = lc.gates.middleCols(cols, B);
          const auto i = gates.topRows(H);
          const auto f = gates.middleRows(H, H);
          const auto g = gates.middleRows(2 * H, H);
          const auto o = gates.bottomRows(H);
          const Mat<T> c_prev = t > 0 ? Mat<T>(lc.cell.middleCols(cols - B, B)) : Mat<T>::Zero(H, B);
          const Mat<T> tc = tanh_of(lc.cell.middleCols(cols, B));
          const Mat<T> dc = dc_next + dh.cwiseProduct(o).cwiseProduct(ones - tc.cwiseProduct(tc));
          da.topRows(H) = dc.cwiseProduct(g).cwiseProduct(i).cwiseProduct(ones - i);
          da.middleRows(H, H) = dc.cwiseProduct(c_prev).cwiseProduct(f).cwiseProduct(ones - f);
          da.middleRows(2 * H, H) = dc.cwiseProduct(i).cwiseProduct(ones - g.cwiseProduct(g));
          da.bottomRows(H) = dh.cwiseProduct(tc).cwiseProduct(o).cwiseProduct(ones - o);
          dc_next = dc.cwiseProduct(f);
          dh_next = p.w_hh.transpose() * da;
          break;
        }
      }
    }

    const Mat<T>& d_hidden = params.cell == CellType::kGru ? d_hidden_affine : d_input_affine;
    auto& g = grads.params.layers[kk];
    g.w_ih.noalias() = d_input_affine * x.transpose();
    g.b_ih = d_input_affine.rowwise().sum();
    g.w_hh.noalias() = d_hidden * h_prev_seq.transpose();
    g.b_hh = d_hidden.rowwise().sum();
    grad_seq = p.w_ih.transpose() * d_input_affine;
  }
  grads.input = std::move(grad_seq);
  return grads;
}

#define DEPLEN_INSTANTIATE_CELLS(T)                                                              \
  template StackParams<T> zero_stack<T>(const Architecture&, int);                               \
  template StackParams<T> zeros_like<T>(const StackParams<T>&);                                  \
  template StackParams<T> init_stack<T>(const Architecture&, Rng&, int);                         \
  template std::vector<TensorView<T>> tensor_views<T>(StackParams<T>&);                          \
  template std::vector<TensorView<const T>> tensor_views<T>(const StackParams<T>&);              \
  template CellState<T> zero_state<T>(CellType, int, int);                                       \
  template CellState<T> cell_step<T>(CellType, const LayerParams<T>&, const Mat<T>&,             \
                                     const CellState<T>&);                                       \
  template StackOutput<T> stack_forward<T>(const StackParams<T>&, const SequenceBatch<T>&);      \
  template StackGradients<T> stack_backward<T>(const StackParams<T>&, const StackCache<T>&,      \
                                               const Mat<T>&);

DEPLEN_INSTANTIATE_CELLS(float)
DEPLEN_INSTANTIATE_CELLS(double)
DEPLEN_INSTANTIATE_CELLS(long double)

}  // namespace deplen
