// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Classical magnitude-domain baselines: spectral subtraction and Wiener
// filtering, both keeping the noisy phase, and the oracle residual between a
// clean spectrum and a coarse estimate.

#include "taylorse/dsp/stft.hpp"

namespace taylorse::classical {

using dsp::ComplexSpectrogram;
using dsp::Grid;

inline constexpr double kDefaultSpectralFloor = 0.002;
inline constexpr std::size_t kDefaultNoiseFrames = 6;

// Stationary noise power per bin: mean |X|^2 over the first `frames` frames.
inline std::vector<double> estimate_noise_psd(const ComplexSpectrogram& x,
                                              std::size_t frames = kDefaultNoiseFrames) {
  if (frames == 0) throw std::invalid_argument("estimate_noise_psd: frames must be > 0");
  const std::size_t l = std::min(frames, x.frames());
  if (l == 0) throw DataError("estimate_noise_psd: empty spectrogram");
  std::vector<double> psd(x.bins(), 0.0);
  for (std::size_t t = 0; t < l; ++t)
    for (std::size_t k = 0; k < x.bins(); ++k) psd[k] += std::norm(x.at(t * x.bins() + k));
  for (auto& v : psd) v /= static_cast<double>(l);
  return psd;
}

// Per-cell noise magnitude from a stationary PSD.
inline Grid psd_to_magnitude(const std::vector<double>& psd, std::size_t frames) {
  Grid g(frames, psd.size());
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < psd.size(); ++k) {
      if (psd[k] < 0.0) throw std::invalid_argument("noise psd must be nonnegative");
      g(t, k) = std::sqrt(psd[k]);
    }
  return g;
}

// max(|X| - |N|, floor |X|) e^{j theta_X}
inline ComplexSpectrogram spectral_subtract(const ComplexSpectrogram& x, const Grid& noise_mag,
                                            double floor = kDefaultSpectralFloor) {
  if (!noise_mag.same_shape(x.real))
    throw std::invalid_argument("spectral_subtract: noise grid shape mismatch");
  if (!(floor >= 0.0 && floor <= 1.0))
    throw std::invalid_argument("spectral_subtract: floor must be in [0, 1]");
  ComplexSpectrogram out = x;
  for (std::size_t i = 0; i < x.cells(); ++i) {
    if (noise_mag.v[i] < 0.0)
      throw std::invalid_argument("spectral_subtract: negative noise magnitude at cell " +
                                  std::to_string(i));
    const double m = std::abs(x.at(i));
    if (m == 0.0) continue;
    const double g = std::max(m - noise_mag.v[i], floor * m) / m;
    out.real.v[i] *= g;
    out.imag.v[i] *= g;
  }
  return out;
}

// M = max(|X|^2 - lambda, 0) / |X|^2, zero where |X| = 0.
inline Grid wiener_gain(const ComplexSpectrogram& x, const Grid& noise_psd) {
  if (!noise_psd.same_shape(x.real))
    throw std::invalid_argument("wiener_gain: noise grid shape mismatch");
  Grid m(x.frames(), x.bins());
  for (std::size_t i = 0; i < x.cells(); ++i) {
    if (noise_psd.v[i] < 0.0)
      throw std::invalid_argument("wiener_gain: negative noise power at cell " + std::to_string(i));
    const double p = std::norm(x.at(i));
    m.v[i] = p > 0.0 ? std::max(p - noise_psd.v[i], 0.0) / p : 0.0;
  }
  return m;
}

inline Grid wiener_gain(const ComplexSpectrogram& x, const std::vector<double>& psd) {
  if (psd.size() != x.bins()) throw std::invalid_argument("wiener_gain: psd has wrong bin count");
  Grid g(x.frames(), x.bins());
  for (std::size_t t = 0; t < x.frames(); ++t)
    for (std::size_t k = 0; k < x.bins(); ++k) g(t, k) = psd[k];
  return wiener_gain(x, g);
}

// M |X| e^{j theta_X}
inline ComplexSpectrogram apply_gain(const Grid& gain, const ComplexSpectrogram& x) {
  if (!gain.same_shape(x.real)) throw std::invalid_argument("apply_gain: shape mismatch");
  ComplexSpectrogram out = x;
  for (std::size_t i = 0; i < x.cells(); ++i) {
    out.real.v[i] *= gain.v[i];
    out.imag.v[i] *= gain.v[i];
  }
  return out;
}

// delta = S - coarse
inline ComplexSpectrogram oracle_residual(const ComplexSpectrogram& clean,
                                          const ComplexSpectrogram& coarse) {
  if (!clean.real.same_shape(coarse.real))
    throw std::invalid_argument("oracle_residual: shape mismatch");
  ComplexSpectrogram d = clean;
  for (std::size_t i = 0; i < clean.cells(); ++i) {
    d.real.v[i] = clean.real.v[i] - coarse.real.v[i];
    d.imag.v[i] = clean.imag.v[i] - coarse.imag.v[i];
  }
  return d;
}

inline ComplexSpectrogram add(const ComplexSpectrogram& a, const ComplexSpectrogram& b) {
  if (!a.real.same_shape(b.real)) throw std::invalid_argument("add: shape mismatch");
  ComplexSpectrogram s = a;
  for (std::size_t i = 0; i < a.cells(); ++i) {
    s.real.v[i] = a.real.v[i] + b.real.v[i];
    s.imag.v[i] = a.imag.v[i] + b.imag.v[i];
  }
  return s;
}

}  // namespace taylorse::classical
