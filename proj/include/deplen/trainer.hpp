#pragma once

#include "deplen/model.hpp"
#include "deplen/optim.hpp"
#include "deplen/types.hpp"
#include "deplen/wavegen.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace deplen {

struct TrainConfig {
  int dataset_size = 1024;
  int batch_size = 64;
  int max_epochs = 200;
  int duration = 5;        // d
  int base_length = 100;   // m before growth
  double ones_fraction = 0.90;   // inclusive
  double zeros_fraction = 0.95;  // exclusive
  int head_width = kHeadWidth;
  AdamConfig adam;

  int batches_per_epoch() const { return dataset_size / batch_size; }
  void validate() const;
};

struct SessionOutcome {
  bool success = false;
  bool diverged = false;
  int epochs_run = 0;
  std::int64_t batches_processed = 0;
  std::int64_t updates_applied = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

/// A prediction replicates a target wave when at least `ones_fraction` of the
/// target's ones and strictly more than `zeros_fraction` of its zeros match.
bool evaluate_success(std::span<const std::uint8_t> prediction, std::span<const std::uint8_t> target,
                      double ones_fraction = 0.90, double zeros_fraction = 0.95);

/// Every sequence of a time-major batch replicates its target.
bool batch_success(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> targets,
                   BatchLayout layout, double ones_fraction = 0.90, double zeros_fraction = 0.95);

struct Batch {
  SequenceBatch<float> inputs;  // 1 x N
  RowVec<float> targets;        // N
  Wave target_bits;             // N, same layout
};

Batch assemble_batch(const Dataset& data, std::span<const std::size_t> indices);

/// What a training session drives. `update` backpropagates the gradient
/// w.r.t. the logits of the most recent `forward` and applies one optimizer
/// step; it throws NonFiniteGradient on divergence.
class SessionModel {
 public:
  virtual ~SessionModel() = default;
  virtual RowVec<float> forward(const SequenceBatch<float>& inputs) = 0;
  virtual void update(const RowVec<float>& grad_logits) = 0;
};

/// Recurrent stack + head trained with Adam in 32-bit arithmetic.
class RecurrentModel final : public SessionModel {
 public:
  RecurrentModel(ModelParams<float> params, AdamConfig adam);

  RowVec<float> forward(const SequenceBatch<float>& inputs) override;
  void update(const RowVec<float>& grad_logits) override;

  const ModelParams<float>& params() const { return params_; }
  const Adam<float>& optimizer() const { return adam_; }

 private:
  ModelParams<float> params_;
  Adam<float> adam_;
  ModelForward<float> last_;
  bool has_forward_ = false;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  std::int64_t batches_processed = 0;
};
using EpochCallback = std::function<void(const EpochLog&)>;

/// Epoch loop over shuffled contiguous batches. Success is checked on each
/// batch's forward pass before any update; the first successful batch ends
/// the session without an optimizer step.
SessionOutcome run_session(SessionModel& model, const Dataset& data, const TrainConfig& config,
                           Rng& shuffle_rng, const EpochCallback& on_epoch = {});

/// Fresh dataset and fresh parameters, all derived from `seed`.
SessionOutcome train_session(const Architecture& arch, int delay, const TrainConfig& config,
                             std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace deplen
