#pragma once

#include "deplen/seed.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deplen {

using Wave = std::vector<std::uint8_t>;

/// Parameters of the delayed square-wave task.
struct WaveformSpec {
  int length = 100;   // m, time steps per sequence
  int duration = 5;   // d, width of each square wave
  int delay = 0;      // l, zeros between the input wave and the target wave

  /// Largest admissible start index, m - 2d - l.
  int max_start() const { return length - 2 * duration - delay; }
  void validate() const;

  friend bool operator==(const WaveformSpec&, const WaveformSpec&) = default;
};

struct WavePair {
  Wave input;
  Wave target;
  int start = 0;

  friend bool operator==(const WavePair&, const WavePair&) = default;
};

struct Dataset {
  WaveformSpec spec;
  std::vector<WavePair> pairs;

  std::size_t size() const { return pairs.size(); }
};

/// Spec for delay `delay`. The sequence grows past `base_length` only when
/// needed to keep at least 20 admissible start positions.
WaveformSpec make_spec(int delay, int duration = 5, int base_length = 100);

/// Deterministic construction for a known start index.
WavePair make_pair(const WaveformSpec& spec, int start);

/// Start index drawn uniformly from [0, m - 2d - l].
WavePair sample_pair(const WaveformSpec& spec, Rng& rng);

Dataset make_dataset(const WaveformSpec& spec, std::size_t count, Rng& rng);

std::string to_bitstring(std::span<const std::uint8_t> wave);

}  // namespace deplen
