#include "deplen/model.hpp"

#include <json.hpp>

#include <stdexcept>

namespace deplen {

using nlohmann::json;

template <typename T>
ModelParams<T> init_model(const Architecture& arch, Rng& rng, int head_width) {
  ModelParams<T> params;
  params.stack = init_stack<T>(arch, rng);
  params.head = init_head<T>(arch.hidden, rng, head_width);
  return params;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
  return {zeros_like(params.stack), zeros_like(params.head)};
}

template <typename T>
std::vector<TensorView<T>> tensor_views(ModelParams<T>& params) {
  auto out = tensor_views(params.stack);
  auto head = tensor_views(params.head);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const ModelParams<T>& params) {
  auto out = tensor_views(params.stack);
  auto head = tensor_views(params.head);
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

template <typename T>
ModelForward<T> model_forward(const ModelParams<T>& params, const SequenceBatch<T>& inputs) {
  ModelForward<T> out;
  out.stack = stack_forward(params.stack, inputs);
  out.head = head_forward(params.head, out.stack.features.values);
  return out;
}

template <typename T>
ModelParams<T> model_backward(const ModelParams<T>& params, const ModelForward<T>& forward,
                              const RowVec<T>& grad_logits) {
  auto head = head_backward(params.head, forward.head.cache, grad_logits);
  auto stack = stack_backward(params.stack, forward.stack.cache, head.features);
  return {std::move(stack.params), std::move(head.params)};
}

template <typename T>
std::string save_checkpoint(const ModelParams<T>& params) {
  json doc;
  doc["cell"] = std::string(to_string(params.stack.cell));
  doc["hidden"] = params.stack.hidden;
  doc["layers"] = params.stack.layers.size();
  doc["head_width"] = params.head.width;
  json tensors = json::object();
  for (const auto& view : tensor_views(params)) {
    std::vector<double> values(view.data, view.data + view.size());
    tensors[view.name] = {{"rows", view.rows}, {"cols", view.cols}, {"data", values}};
  }
  doc["tensors"] = std::move(tensors);
  for (std::size_t k = 0; k < params.head.running.size(); ++k) {
    const auto& rs = params.head.running[k];
    doc["running"].push_back({{"mean", std::vector<double>(rs.mean.data(), rs.mean.data() + rs.mean.size())},
                              {"var", std::vector<double>(rs.var.data(), rs.var.data() + rs.var.size())}});
  }
  return doc.dump();
}

template <typename T>
ModelParams<T> load_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
    Architecture arch;
    arch.cell = parse_cell_type(doc.at("cell").get<std::string>());
    arch.hidden = doc.at("hidden").get<int>();
    arch.layers = doc.at("layers").get<int>();
    arch.validate();
    ModelParams<T> params;
    params.stack = zero_stack<T>(arch);
    Rng unused;
    params.head = init_head<T>(arch.hidden, unused, doc.at("head_width").template get<int>());

    const auto& tensors = doc.at("tensors");
    for (auto& view : tensor_views(params)) {
      const auto& entry = tensors.at(view.name);
      const auto values = entry.at("data").template get<std::vector<double>>();
      if (entry.at("rows").template get<std::ptrdiff_t>() != view.rows ||
          entry.at("cols").template get<std::ptrdiff_t>() != view.cols ||
          static_cast<std::ptrdiff_t>(values.size()) != view.size()) {
        throw std::runtime_error("checkpoint tensor '" + view.name + "' has the wrong shape");
      }
      for (std::ptrdiff_t i = 0; i < view.size(); ++i) view.data[i] = static_cast<T>(values[i]);
    }
    if (doc.contains("running")) {
      const auto& running = doc.at("running");
      for (std::size_t k = 0; k < params.head.running.size() && k < running.size(); ++k) {
        const auto mean = running[k].at("mean").get<std::vector<double>>();
        const auto var = running[k].at("var").get<std::vector<double>>();
        auto& rs = params.head.running[k];
        if (static_cast<std::ptrdiff_t>(mean.size()) != rs.mean.size() ||
            static_cast<std::ptrdiff_t>(var.size()) != rs.var.size()) {
          throw std::runtime_error("checkpoint running statistics have the wrong shape");
        }
        for (std::size_t i = 0; i < mean.size(); ++i) {
          rs.mean[i] = static_cast<T>(mean[i]);
          rs.var[i] = static_cast<T>(var[i]);
        }
      }
    }
    return params;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

#define DEPLEN_INSTANTIATE_MODEL(T)                                                              \
  template ModelParams<T> init_model<T>(const Architecture&, Rng&, int);                         \
  template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                  \
  template std::vector<TensorView<T>> tensor_views<T>(ModelParams<T>&);                          \
  template std::vector<TensorView<const T>> tensor_views<T>(const ModelParams<T>&);              \
  template ModelForward<T> model_forward<T>(const ModelParams<T>&, const SequenceBatch<T>&);     \
  template ModelParams<T> model_backward<T>(const ModelParams<T>&, const ModelForward<T>&,       \
                                            const RowVec<T>&);                                   \
  template std::string save_checkpoint<T>(const ModelParams<T>&);                                \
  template ModelParams<T> load_checkpoint<T>(std::string_view);

DEPLEN_INSTANTIATE_MODEL(float)
DEPLEN_INSTANTIATE_MODEL(double)
DEPLEN_INSTANTIATE_MODEL(long double)

}  // namespace deplen
