// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cmath>
#include <vector>

#include "taylorse/error.hpp"

namespace taylorse::dsp {

inline constexpr int kDefaultSampleRate = 16000;

// Mono signal with samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    if (sample_rate <= 0)
      throw DataError("waveform sample rate must be positive, got " +
                      std::to_string(sample_rate));
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!std::isfinite(samples[i]))
        throw DataError("waveform sample " + std::to_string(i) + " is not finite");
  }
};

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double mean_power(const std::vector<double>& x) {
  return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size());
}

}  // namespace taylorse::dsp
