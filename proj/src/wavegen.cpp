#include "deplen/wavegen.hpp"

#include <algorithm>
#include <stdexcept>

namespace deplen {

void WaveformSpec::validate() const {
  if (duration < 1) throw std::invalid_argument("wave duration must be >= 1");
  if (delay < 0) throw std::invalid_argument("delay must be >= 0");
  if (length < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (max_start() < 0) {
    throw std::invalid_argument("sequence length " + std::to_string(length) +
                                " cannot hold two waves of duration " + std::to_string(duration) +
                                " separated by delay " + std::to_string(delay));
  }
}

WaveformSpec make_spec(int delay, int duration, int base_length) {
  if (delay < 0) throw std::invalid_argument("delay must be >= 0");
  if (duration < 1) throw std::invalid_argument("wave duration must be >= 1");
  constexpr int kStartSlack = 20;
  WaveformSpec spec;
  spec.duration = duration;
  spec.delay = delay;
  spec.length = std::max(base_length, 2 * duration + delay + kStartSlack);
  return spec;
}

WavePair make_pair(const WaveformSpec& spec, int start) {
  spec.validate();
  if (start < 0 || start > spec.max_start()) {
    throw std::out_of_range("start index " + std::to_string(start) + " outside [0, " +
                            std::to_string(spec.max_start()) + "]");
  }
  WavePair pair;
  pair.start = start;
  pair.input.assign(spec.length, 0);
  pair.target.assign(spec.length, 0);
  std::fill_n(pair.input.begin() + start, spec.duration, 1);
  std::fill_n(pair.target.begin() + start + spec.delay + spec.duration, spec.duration, 1);
  return pair;
}

WavePair sample_pair(const WaveformSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_int_distribution<int> start(0, spec.max_start());
  return make_pair(spec, start(rng));
}

Dataset make_dataset(const WaveformSpec& spec, std::size_t count, Rng& rng) {
  if (count == 0) throw std::invalid_argument("dataset must contain at least one sample");
  Dataset data;
  data.spec = spec;
  data.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) data.pairs.push_back(sample_pair(spec, rng));
  return data;
}

std::string to_bitstring(std::span<const std::uint8_t> wave) {
  std::string out;
  out.reserve(wave.size());
  for (auto v : wave) out.push_back(v ? '1' : '0');
  return out;
}

}  // namespace deplen
