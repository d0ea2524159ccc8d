// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "taylorse/eigen.hpp"

#include <unsupported/Eigen/FFT>

#include "taylorse/dsp/waveform.hpp"

namespace taylorse::dsp {

enum class Window { sqrt_hann, hann, hamming };

inline Window window_from_string(const std::string& s) {
  if (s == "sqrt_hann") return Window::sqrt_hann;
  if (s == "hann") return Window::hann;
  if (s == "hamming") return Window::hamming;
  throw UsageError("unknown window '" + s + "'");
}

inline std::string to_string(Window w) {
  switch (w) {
    case Window::sqrt_hann: return "sqrt_hann";
    case Window::hann: return "hann";
    case Window::hamming: return "hamming";
  }
  return "?";
}

struct AnalysisConfig {
  std::size_t win_len = 320;  // 20 ms at 16 kHz
  std::size_t hop = 160;
  std::size_t fft_size = 320;
  Window window = Window::sqrt_hann;
  double compression_beta = 0.5;

  std::size_t bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (hop == 0 || hop > win_len || win_len > fft_size)
      throw UsageError("analysis config requires 0 < hop <= win_len <= fft_size, got hop=" +
                       std::to_string(hop) + " win_len=" + std::to_string(win_len) +
                       " fft_size=" + std::to_string(fft_size));
    if (!(compression_beta > 0.0 && compression_beta <= 1.0))
      throw UsageError("compression beta must be in (0, 1]");
  }
};

// Periodic window of length n; used for analysis and synthesis alike.
inline std::vector<double> make_window(Window type, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(n));
    switch (type) {
      case Window::sqrt_hann: w[i] = std::sqrt(0.5 - 0.5 * c); break;
      case Window::hann: w[i] = 0.5 - 0.5 * c; break;
      case Window::hamming: w[i] = 0.54 - 0.46 * c; break;
    }
  }
  return w;
}

// Real-valued frames x bins matrix, row-major.
struct Grid {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(std::size_t l, std::size_t k, double fill = 0.0) : frames(l), bins(k), v(l * k, fill) {}

  double& operator()(std::size_t l, std::size_t k) { return v[l * bins + k]; }
  double operator()(std::size_t l, std::size_t k) const { return v[l * bins + k]; }
  std::size_t size() const noexcept { return v.size(); }
  bool same_shape(const Grid& o) const { return frames == o.frames && bins == o.bins; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

// Complex time-frequency grid stored as real and imaginary planes.
// source_length is the waveform length it was computed from (0 if unknown).
struct ComplexSpectrogram {
  Grid real;
  Grid imag;
  std::size_t source_length = 0;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t frames, std::size_t bins)
      : real(frames, bins), imag(frames, bins) {}

  std::size_t frames() const noexcept { return real.frames; }
  std::size_t bins() const noexcept { return real.bins; }
  std::size_t cells() const noexcept { return real.size(); }
  std::complex<double> at(std::size_t i) const { return {real.v[i], imag.v[i]}; }
  void set(std::size_t i, std::complex<double> z) {
    real.v[i] = z.real();
    imag.v[i] = z.imag();
  }

  void validate() const {
    if (!real.same_shape(imag))
      throw std::invalid_argument("spectrogram real/imag shape mismatch");
    for (std::size_t i = 0; i < real.size(); ++i)
      if (!std::isfinite(real.v[i]) || !std::isfinite(imag.v[i]))
        throw DataError("spectrogram cell " + std::to_string(i) + " is not finite");
  }
  friend bool operator==(const ComplexSpectrogram&, const ComplexSpectrogram&) = default;
};

// Frames needed so that every sample of an n-sample signal, preceded by
// win_len/2 samples of reflection padding, is covered by all frames
// overlapping it.
inline std::size_t frame_count(std::size_t n, const AnalysisConfig& cfg) {
  return (cfg.win_len / 2 + n - 1) / cfg.hop + 1;
}

inline ComplexSpectrogram stft(const Waveform& wave, const AnalysisConfig& cfg = {}) {
  cfg.validate();
  wave.validate();
  const std::size_t n = wave.size();
  if (n < cfg.win_len)
    throw DataError("signal of " + std::to_string(n) + " samples is shorter than one window (" +
                    std::to_string(cfg.win_len) + ")");
  const std::size_t pad = cfg.win_len / 2;
  const std::size_t frames = frame_count(n, cfg);
  std::vector<double> padded((frames - 1) * cfg.hop + cfg.win_len, 0.0);
  for (std::size_t i = 0; i < pad; ++i) padded[i] = wave.samples[pad - i];
  std::copy(wave.samples.begin(), wave.samples.end(), padded.begin() + pad);

  const auto win = make_window(cfg.window, cfg.win_len);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(cfg.fft_size, 0.0);
  std::vector<std::complex<double>> spec;
  ComplexSpectrogram out(frames, cfg.bins());
  out.source_length = n;
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t i = 0; i < cfg.win_len; ++i) frame[i] = padded[l * cfg.hop + i] * win[i];
    fft.fwd(spec, frame);
    for (std::size_t k = 0; k < cfg.bins(); ++k) {
      out.real(l, k) = spec[k].real();
      out.imag(l, k) = spec[k].imag();
    }
  }
  return out;
}

// Weighted overlap-add inverse. The result is trimmed to the source length
// when the spectrogram records one; otherwise it spans (L-1)*hop + win_len
// samples of the padded time axis.
inline Waveform istft(const ComplexSpectrogram& spec, const AnalysisConfig& cfg = {},
                      int sample_rate = kDefaultSampleRate) {
  cfg.validate();
  if (!spec.real.same_shape(spec.imag) || spec.bins() != cfg.bins())
    throw std::invalid_argument("istft: spectrogram has " + std::to_string(spec.bins()) +
                                " bins, config expects " + std::to_string(cfg.bins()));
  const std::size_t frames = spec.frames();
  if (frames == 0) throw std::invalid_argument("istft: empty spectrogram");
  const std::size_t len = (frames - 1) * cfg.hop + cfg.win_len;
  const auto win = make_window(cfg.window, cfg.win_len);
  std::vector<double> acc(len, 0.0), norm(len, 0.0);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(cfg.bins());
  std::vector<double> frame;
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t k = 0; k < cfg.bins(); ++k) half[k] = {spec.real(l, k), spec.imag(l, k)};
    fft.inv(frame, half, static_cast<Eigen::Index>(cfg.fft_size));
    for (std::size_t i = 0; i < cfg.win_len; ++i) {
      acc[l * cfg.hop + i] += frame[i] * win[i];
      norm[l * cfg.hop + i] += win[i] * win[i];
    }
  }
  for (std::size_t i = 0; i < len; ++i) acc[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;

  Waveform out;
  out.sample_rate = sample_rate;
  const std::size_t n = spec.source_length;
  const std::size_t pad = cfg.win_len / 2;
  if (n == 0) {
    out.samples = std::move(acc);
  } else {
    if (frame_count(n, cfg) != frames)
      throw std::invalid_argument("istft: " + std::to_string(frames) +
                                  " frames inconsistent with source length " +
                                  std::to_string(n));
    out.samples.assign(acc.begin() + static_cast<std::ptrdiff_t>(pad),
                       acc.begin() + static_cast<std::ptrdiff_t>(pad + n));
  }
  return out;
}

// |out| = |in|^beta with phase kept; zero cells stay zero.
inline ComplexSpectrogram compress(const ComplexSpectrogram& spec, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("compress: beta must be > 0");
  ComplexSpectrogram out = spec;
  for (std::size_t i = 0; i < spec.cells(); ++i) {
    const double r = spec.real.v[i], im = spec.imag.v[i];
    const double m = std::hypot(r, im);
    if (m > 0.0) {
      const double s = std::pow(m, beta - 1.0);
      out.real.v[i] = r * s;
      out.imag.v[i] = im * s;
    }
  }
  return out;
}

inline ComplexSpectrogram decompress(const ComplexSpectrogram& spec, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("decompress: beta must be > 0");
  return compress(spec, 1.0 / beta);
}

struct Polar {
  Grid magnitude;
  Grid phase;
};

// Phase is reported as 0 where the magnitude is 0.
inline Polar mag_phase(const ComplexSpectrogram& spec) {
  Polar p{Grid(spec.frames(), spec.bins()), Grid(spec.frames(), spec.bins())};
  for (std::size_t i = 0; i < spec.cells(); ++i) {
    const double r = spec.real.v[i], im = spec.imag.v[i];
    p.magnitude.v[i] = std::hypot(r, im);
    p.phase.v[i] = p.magnitude.v[i] > 0.0 ? std::atan2(im, r) : 0.0;
  }
  return p;
}

inline ComplexSpectrogram recombine(const Grid& magnitude, const Grid& phase) {
  if (!magnitude.same_shape(phase))
    throw std::invalid_argument("recombine: magnitude/phase shape mismatch");
  ComplexSpectrogram out(magnitude.frames, magnitude.bins);
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    const double m = magnitude.v[i];
    if (m < 0.0)
      throw std::invalid_argument("recombine: negative magnitude at cell " + std::to_string(i));
    out.real.v[i] = m * std::cos(phase.v[i]);
    out.imag.v[i] = m * std::sin(phase.v[i]);
  }
  return out;
}

inline Grid magnitude(const ComplexSpectrogram& spec) { return mag_phase(spec).magnitude; }

}  // namespace taylorse::dsp
