#include "deplen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace deplen {

namespace {

// Tolerance for threshold * count products that should be integral.
constexpr double kThresholdSlack = 1e-9;

}  // namespace

void TrainConfig::validate() const {
  if (dataset_size < 1 || batch_size < 1) throw std::invalid_argument("dataset and batch size must be positive");
  if (dataset_size % batch_size != 0) {
    throw std::invalid_argument("dataset size " + std::to_string(dataset_size) +
                                " is not divisible by batch size " + std::to_string(batch_size));
  }
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (duration < 1) throw std::invalid_argument("wave duration must be >= 1");
  if (ones_fraction < 0 || ones_fraction > 1 || zeros_fraction < 0 || zeros_fraction > 1) {
    throw std::invalid_argument("success fractions must lie in [0, 1]");
  }
  if (head_width < 1) throw std::invalid_argument("head width must be >= 1");
}

bool evaluate_success(std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> target,
                      double ones_fraction, double zeros_fraction) {
  if (prediction.size() != target.size()) throw std::invalid_argument("prediction/target length mismatch");
  std::int64_t ones = 0, ones_hit = 0, zeros = 0, zeros_hit = 0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t]) {
      ++ones;
      ones_hit += prediction[t] ? 1 : 0;
    } else {
      ++zeros;
      zeros_hit += prediction[t] ? 0 : 1;
    }
  }
  const bool ones_ok = static_cast<double>(ones_hit) >= ones_fraction * static_cast<double>(ones) - kThresholdSlack;
  const bool zeros_ok =
      zeros == 0 || static_cast<double>(zeros_hit) > zeros_fraction * static_cast<double>(zeros) + kThresholdSlack;
  return ones_ok && zeros_ok;
}

bool batch_success(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> targets,
                   BatchLayout layout, double ones_fraction, double zeros_fraction) {
  if (predictions.size() != targets.size() || static_cast<std::ptrdiff_t>(targets.size()) != layout.columns()) {
    throw std::invalid_argument("batch_success: shapes do not match layout");
  }
  Wave pred(layout.steps), tgt(layout.steps);
  for (int b = 0; b < layout.batch; ++b) {
    for (int t = 0; t < layout.steps; ++t) {
      pred[t] = predictions[layout.index(b, t)];
      tgt[t] = targets[layout.index(b, t)];
    }
    if (!evaluate_success(pred, tgt, ones_fraction, zeros_fraction)) return false;
  }
  return true;
}

Batch assemble_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const BatchLayout layout{static_cast<int>(indices.size()), data.spec.length};
  Batch batch;
  batch.inputs.layout = layout;
  batch.inputs.values.resize(1, layout.columns());
  batch.targets.resize(layout.columns());
  batch.target_bits.resize(layout.columns());
  for (int b = 0; b < layout.batch; ++b) {
    const auto& pair = data.pairs.at(indices[b]);
    for (int t = 0; t < layout.steps; ++t) {
      const auto col = layout.index(b, t);
      batch.inputs.values(0, col) = static_cast<float>(pair.input[t]);
      batch.targets[col] = static_cast<float>(pair.target[t]);
      batch.target_bits[col] = pair.target[t];
    }
  }
  return batch;
}

RecurrentModel::RecurrentModel(ModelParams<float> params, AdamConfig adam)
    : params_(std::move(params)), adam_(adam) {}

RowVec<float> RecurrentModel::forward(const SequenceBatch<float>& inputs) {
  last_ = model_forward(params_, inputs);
  has_forward_ = true;
  update_running_stats(params_.head, last_.head.cache);
  return last_.logits();
}

void RecurrentModel::update(const RowVec<float>& grad_logits) {
  if (!has_forward_) throw std::logic_error("RecurrentModel::update called before forward");
  ModelParams<float> grads = model_backward(params_, last_, grad_logits);
  auto values = tensor_views(params_);
  auto gradients = tensor_views(std::as_const(grads));
  std::vector<ParamSlot<float>> slots;
  slots.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    slots.push_back({values[i].data, gradients[i].data, static_cast<std::size_t>(values[i].size())});
  }
  adam_.step(slots);
  has_forward_ = false;
}

SessionOutcome run_session(SessionModel& model, const Dataset& data, const TrainConfig& config,
                           Rng& shuffle_rng, const EpochCallback& on_epoch) {
  config.validate();
  if (static_cast<int>(data.size()) != config.dataset_size) {
    throw std::invalid_argument("dataset size does not match configuration");
  }
  const int B = config.batch_size;
  const int d = data.spec.duration;
  const int m = data.spec.length;

  SessionOutcome outcome;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    outcome.epochs_run = epoch;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    int loss_count = 0;
    for (int b = 0; b < config.batches_per_epoch(); ++b) {
      const Batch batch = assemble_batch(data, std::span(order).subspan(static_cast<std::size_t>(b) * B, B));
      const RowVec<float> logits = model.forward(batch.inputs);
      ++outcome.batches_processed;

      const Wave predictions = predict(logits);
      const auto loss = weighted_bce(logits, batch.targets, B, d, m);
      outcome.final_loss = loss.loss;
      if (batch_success(predictions, batch.target_bits, batch.inputs.layout, config.ones_fraction,
                        config.zeros_fraction)) {
        outcome.success = true;
        return outcome;
      }
      if (!std::isfinite(loss.loss)) {
        outcome.diverged = true;
        return outcome;
      }
      try {
        model.update(loss.grad);
      } catch (const NonFiniteGradient&) {
        outcome.diverged = true;
        return outcome;
      }
      ++outcome.updates_applied;
      loss_sum += loss.loss;
      ++loss_count;
    }
    if (on_epoch) on_epoch({epoch, loss_count ? loss_sum / loss_count : 0.0, outcome.batches_processed});
  }
  return outcome;
}

SessionOutcome train_session(const Architecture& arch, int delay, const TrainConfig& config,
                             std::uint64_t seed, const EpochCallback& on_epoch) {
  arch.validate();
  config.validate();
  const WaveformSpec spec = make_spec(delay, config.duration, config.base_length);
  Rng data_rng = make_stream(seed, Stream::kData);
  Rng init_rng = make_stream(seed, Stream::kInit);
  Rng shuffle_rng = make_stream(seed, Stream::kShuffle);

  const Dataset data = make_dataset(spec, static_cast<std::size_t>(config.dataset_size), data_rng);
  RecurrentModel model(init_model<float>(arch, init_rng, config.head_width), config.adam);
  SessionOutcome outcome = run_session(model, data, config, shuffle_rng, on_epoch);
  outcome.seed = seed;
  return outcome;
}

}  // namespace deplen
