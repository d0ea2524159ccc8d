// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Synthetic noisy/clean pairs. Clean signals are sums of harmonics with
// syllable-rate amplitude envelopes; noise is white noise through a random
// spectral tilt. Every recipe is reproducible from its seeds.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "taylorse/dsp/waveform.hpp"

namespace taylorse::train {

// SNR value that means "no noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct MixtureRecipe {
  std::uint64_t clean_seed = 0;
  std::uint64_t noise_seed = 0;
  double snr_db = 0.0;
  double length_s = 1.0;
  int sample_rate = dsp::kDefaultSampleRate;

  std::size_t samples() const {
    return static_cast<std::size_t>(std::llround(length_s * sample_rate));
  }
};

struct Mixture {
  dsp::Waveform noisy;
  dsp::Waveform clean;
  dsp::Waveform noise;  // scaled, so noisy = clean + noise
};

// 3-8 harmonics of a gliding f0 in [90, 260] Hz under an AM envelope, after
// 0.1 s of silence (at most a quarter of the clip).
inline dsp::Waveform synth_clean(std::uint64_t seed, std::size_t n, int rate) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fs = static_cast<double>(rate);
  const double f0 = 90.0 + 170.0 * u(rng);
  const double glide = (u(rng) - 0.5) * 0.4;  // relative f0 change over 1 s
  const double am_rate = 2.0 + 4.0 * u(rng);
  const double am_phase = 2.0 * std::numbers::pi * u(rng);
  const int harmonics = 3 + static_cast<int>(u(rng) * 6.0);
  std::vector<double> amp(harmonics), phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = (0.3 + 0.7 * u(rng)) / (h + 1);
    phase[h] = 2.0 * std::numbers::pi * u(rng);
  }
  const std::size_t lead = std::min(static_cast<std::size_t>(0.1 * fs), n / 4);
  dsp::Waveform w;
  w.sample_rate = rate;
  w.samples.assign(n, 0.0);
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    theta += 2.0 * std::numbers::pi * f0 * (1.0 + glide * t) / fs;
    if (i < lead) continue;
    const double ramp = std::min(1.0, static_cast<double>(i - lead) / (0.02 * fs));
    const double am = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase);
    const double env = ramp * (0.15 + 0.85 * am * am);
    double s = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      const double fh = f0 * (h + 1);
      if (fh >= 0.45 * fs) break;
      s += amp[h] * std::sin((h + 1) * theta + phase[h]);
    }
    w.samples[i] = env * s;
  }
  const double rms = std::sqrt(dsp::mean_power(w.samples));
  if (rms > 0.0) {
    const double target = 0.05 + 0.15 * u(rng);
    for (auto& v : w.samples) v *= target / rms;
  }
  return w;
}

// White Gaussian noise through y[n] = x[n] + a y[n-1], a in [-0.9, 0.9].
inline dsp::Waveform synth_noise(std::uint64_t seed, std::size_t n, int rate) {
  std::mt19937_64 rng(seed);
  const double a = std::uniform_real_distribution<double>(-0.9, 0.9)(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  dsp::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  double y = 0.0;
  for (auto& v : w.samples) v = y = g(rng) + a * y;
  return w;
}

// noisy = clean + g noise with 10 log10(P_clean / P_{g noise}) = snr_db. The
// three signals are rescaled together if the mixture would clip.
inline Mixture mix(dsp::Waveform clean, const dsp::Waveform& noise, double snr_db) {
  clean.validate();
  if (noise.size() != clean.size())
    throw std::invalid_argument("mix: clean and noise lengths differ");
  const double pc = dsp::mean_power(clean.samples);
  if (!(pc > 0.0)) throw DataError("mix: clean source is silent");
  Mixture m;
  m.noise = noise;
  m.noise.sample_rate = clean.sample_rate;
  if (snr_db == kNoNoise) {
    std::fill(m.noise.samples.begin(), m.noise.samples.end(), 0.0);
  } else {
    if (!std::isfinite(snr_db)) throw std::invalid_argument("mix: snr must be finite or +inf");
    const double pn = dsp::mean_power(noise.samples);
    if (!(pn > 0.0)) throw DataError("mix: noise source is silent");
    const double g = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
    for (auto& v : m.noise.samples) v *= g;
  }
  m.noisy = clean;
  for (std::size_t i = 0; i < clean.size(); ++i) m.noisy.samples[i] += m.noise.samples[i];
  double peak = 0.0;
  for (double v : m.noisy.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.99) {
    const double s = 0.99 / peak;
    for (auto* w : {&m.noisy, &clean, &m.noise})
      for (auto& v : w->samples) v *= s;
  }
  m.clean = std::move(clean);
  return m;
}

inline Mixture synthesize_mixture(const MixtureRecipe& r) {
  if (!(r.length_s > 0.0) || r.sample_rate <= 0)
    throw std::invalid_argument("mixture recipe needs positive length and sample rate");
  const std::size_t n = r.samples();
  return mix(synth_clean(r.clean_seed, n, r.sample_rate),
             synth_noise(r.noise_seed, n, r.sample_rate), r.snr_db);
}

// Recipe i draws its seeds and SNR from mix_seed(seed, i) only, so any subset
// can be built independently and in any order.
inline MixtureRecipe make_recipe(std::uint64_t seed, std::size_t index, double snr_lo,
                                 double snr_hi, double length_s) {
  std::mt19937_64 rng(mix_seed(seed, index));
  MixtureRecipe r;
  r.clean_seed = rng();
  r.noise_seed = rng();
  r.snr_db = snr_lo == snr_hi ? snr_lo
                              : std::uniform_real_distribution<double>(snr_lo, snr_hi)(rng);
  r.length_s = length_s;
  return r;
}

inline double measured_snr_db(const Mixture& m) {
  return 10.0 * std::log10(dsp::mean_power(m.clean.samples) / dsp::mean_power(m.noise.samples));
}

}  // namespace taylorse::train
