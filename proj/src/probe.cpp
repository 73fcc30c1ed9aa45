#include "deplen/probe.hpp"

#include "deplen/seed.hpp"

#include <chrono>
#include <future>
#include <optional>
#include <stdexcept>

namespace deplen {

namespace {

struct Decision {
  bool settled = false;
  bool positive = false;
  int successes = 0;
  int trials = 0;
};

// Scans outcomes in trial order and reports the first point at which the
// majority decision is fixed (or, without early stopping, the full count).
Decision decide(const std::vector<std::optional<bool>>& outcomes, const ProbeConfig& config) {
  const int n = config.trials_per_length;
  const int need = config.required_successes;
  Decision d;
  int failures = 0;
  for (int i = 0; i < n; ++i) {
    if (!outcomes[i].has_value()) return d;
    ++d.trials;
    if (*outcomes[i]) {
      ++d.successes;
    } else {
      ++failures;
    }
    const bool won = d.successes >= need;
    const bool lost = failures > n - need;
    if (config.early_stop && (won || lost)) {
      d.settled = true;
      d.positive = won;
      return d;
    }
  }
  d.settled = true;
  d.positive = d.successes >= need;
  return d;
}

}  // namespace

void ProbeConfig::validate() const {
  if (trials_per_length < 1) throw std::invalid_argument("trials_per_length must be >= 1");
  if (required_successes < 1 || required_successes > trials_per_length) {
    throw std::invalid_argument("required_successes must lie in [1, trials_per_length]");
  }
  if (max_delay < 1 || (max_delay & (max_delay - 1)) != 0) {
    throw std::invalid_argument("max_delay must be a power of two");
  }
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  train.validate();
}

std::uint64_t trial_seed(std::uint64_t probe_seed, std::int64_t delay, int trial) {
  return derive_seed(probe_seed, {static_cast<std::uint64_t>(delay), static_cast<std::uint64_t>(trial)});
}

std::uint64_t probe_seed(std::uint64_t master_seed, const Architecture& arch, int run) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(arch.cell), static_cast<std::uint64_t>(arch.hidden),
                                   static_cast<std::uint64_t>(arch.layers), static_cast<std::uint64_t>(run)});
}

Assessment assess(const TrialRunner& runner, std::int64_t delay, const ProbeConfig& config,
                  std::uint64_t probe_seed) {
  if (delay < 1) throw std::invalid_argument("assessed delay must be >= 1");
  const int n = config.trials_per_length;
  std::vector<std::optional<bool>> outcomes(n);
  int launched = 0;
  Decision decision;
  while (!(decision = decide(outcomes, config)).settled) {
    // Launch just enough trials to possibly settle the decision.
    const int remaining = n - launched;
    const int wave = std::min(std::max(config.jobs, 1), remaining);
    if (wave == 1) {
      outcomes[launched] = runner(delay, launched, trial_seed(probe_seed, delay, launched));
      ++launched;
      continue;
    }
    std::vector<std::future<bool>> pending;
    for (int i = 0; i < wave; ++i) {
      const int trial = launched + i;
      pending.push_back(std::async(std::launch::async, [&runner, delay, trial, probe_seed] {
        return runner(delay, trial, trial_seed(probe_seed, delay, trial));
      }));
    }
    for (int i = 0; i < wave; ++i) outcomes[launched + i] = pending[i].get();
    launched += wave;
  }
  return {delay, decision.successes, decision.trials, decision.positive};
}

ProbeResult grow_terminate_search(const Assessor& assessor, std::int64_t max_delay) {
  if (max_delay < 1) throw std::invalid_argument("max_delay must be >= 1");
  ProbeResult result;
  auto run = [&](std::int64_t delay) {
    result.assessments.push_back(assessor(delay));
    return result.assessments.back().positive;
  };

  std::int64_t delay = 1;
  if (!run(delay)) {
    result.threshold = 0;
    return result;
  }
  bool positive = true;
  while (positive && delay < max_delay) {
    delay *= 2;
    positive = run(delay);
  }
  if (positive) {
    result.threshold = delay;
    result.capped = true;
    return result;
  }

  std::int64_t lo = delay / 2;
  std::int64_t hi = delay;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (run(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.threshold = lo;
  return result;
}

TrialRunner training_trial_runner(const Architecture& arch, const TrainConfig& config) {
  return [arch, config](std::int64_t delay, int, std::uint64_t seed) {
    return train_session(arch, static_cast<int>(delay), config, seed).success;
  };
}

ProbeResult probe_architecture(const ProbeConfig& config, std::uint64_t seed, const TrialRunner& runner) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ProbeResult result = grow_terminate_search(
      [&](std::int64_t delay) { return assess(runner, delay, config, seed); }, config.max_delay);
  result.seed = seed;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace deplen
