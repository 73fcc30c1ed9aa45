#pragma once

#include "deplen/trainer.hpp"
#include "deplen/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace deplen {

struct ProbeConfig {
  int trials_per_length = 5;
  int required_successes = 4;
  std::int64_t max_delay = 4096;
  // Stop an assessment once its decision can no longer change.
  bool early_stop = true;
  // Concurrent training sessions inside one assessment.
  int jobs = 1;
  TrainConfig train;

  void validate() const;
};

struct Assessment {
  std::int64_t delay = 0;
  int successes = 0;
  int trials_run = 0;
  bool positive = false;

  friend bool operator==(const Assessment&, const Assessment&) = default;
};

struct ProbeResult {
  std::int64_t threshold = 0;
  bool capped = false;
  std::vector<Assessment> assessments;  // evaluation order
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// One training trial at `delay`; returns whether the session succeeded.
using TrialRunner = std::function<bool(std::int64_t delay, int trial, std::uint64_t seed)>;

/// Decides whether a given delay is learnable.
using Assessor = std::function<Assessment(std::int64_t delay)>;

/// Seed for trial `trial` at `delay` under a probe seed.
std::uint64_t trial_seed(std::uint64_t probe_seed, std::int64_t delay, int trial);

/// Seed of the `run`-th probe of an architecture under the sweep's master seed.
std::uint64_t probe_seed(std::uint64_t master_seed, const Architecture& arch, int run);

/// Majority assessment at one delay. The result equals what running every
/// trial in index order would give; with early stopping, trials past the
/// point where the decision is fixed are skipped.
Assessment assess(const TrialRunner& runner, std::int64_t delay, const ProbeConfig& config,
                  std::uint64_t probe_seed);

/// Doubles the delay from 1 while assessments stay positive, then binary
/// searches between the last positive and the first negative delay. The
/// growth phase's positive result is trusted, never re-assessed.
ProbeResult grow_terminate_search(const Assessor& assessor, std::int64_t max_delay);

TrialRunner training_trial_runner(const Architecture& arch, const TrainConfig& config);

/// Full probe for one architecture with the given probe seed.
ProbeResult probe_architecture(const ProbeConfig& config, std::uint64_t probe_seed,
                               const TrialRunner& runner);

}  // namespace deplen
