// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Waveform-level enhancement with a trained model or a classical baseline,
// and the per-order export used for inspection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "taylorse/classical/classical.hpp"
#include "taylorse/model/taylor.hpp"

namespace taylorse {

inline bool is_silent(const dsp::Waveform& w) {
  return std::all_of(w.samples.begin(), w.samples.end(), [](double v) { return v == 0.0; });
}

// Model estimate of the clean waveform, same length and rate as the input.
// Silent input is returned unchanged.
template <class T>
dsp::Waveform enhance(model::TaylorModel<T>& m, const dsp::Waveform& noisy,
                      const dsp::AnalysisConfig& acfg = {}) {
  noisy.validate();
  if (is_silent(noisy)) return noisy;
  const double beta = m.config().beta;
  const auto x = dsp::stft(noisy, acfg);
  const auto tr = m.trace(model::to_tensor<T>(dsp::compress(x, beta)));
  auto s = dsp::decompress(model::to_spectrogram(tr.estimate), beta);
  s.source_length = x.source_length;
  return dsp::istft(s, acfg, noisy.sample_rate);
}

enum class Classical { subtract, wiener };

inline Classical classical_from_string(const std::string& s) {
  if (s == "subtract") return Classical::subtract;
  if (s == "wiener") return Classical::wiener;
  throw UsageError("unknown classical method '" + s + "' (expected subtract or wiener)");
}

// Baseline with a stationary noise estimate from the leading frames.
inline dsp::Waveform enhance_classical(const dsp::Waveform& noisy, Classical method,
                                       const dsp::AnalysisConfig& acfg = {},
                                       std::size_t noise_frames = classical::kDefaultNoiseFrames,
                                       double floor = classical::kDefaultSpectralFloor) {
  noisy.validate();
  if (is_silent(noisy)) return noisy;
  const auto x = dsp::stft(noisy, acfg);
  const auto psd = classical::estimate_noise_psd(x, noise_frames);
  auto s = method == Classical::subtract
               ? classical::spectral_subtract(x, classical::psd_to_magnitude(psd, x.frames()), floor)
               : classical::apply_gain(classical::wiener_gain(x, psd), x);
  return dsp::istft(s, acfg, noisy.sample_rate);
}

// Grids exported by inspect, in the compressed domain: the coarse spectrum,
// each weighted term T_q / q!, their sum over q >= 1, and the estimate.
struct OrderExport {
  std::vector<std::pair<std::string, dsp::ComplexSpectrogram>> grids;
};

template <class T>
OrderExport order_export(model::TaylorModel<T>& m, const dsp::Waveform& noisy,
                         const dsp::AnalysisConfig& acfg = {}) {
  noisy.validate();
  const double beta = m.config().beta;
  const auto tr = m.trace(model::to_tensor<T>(dsp::compress(dsp::stft(noisy, acfg), beta)));
  OrderExport ex;
  ex.grids.emplace_back("order_0", model::to_spectrogram(tr.coarse));
  ad::Tensor<T> rsum(tr.coarse.shape());
  for (std::size_t q = 1; q <= tr.terms.size(); ++q) {
    ad::Tensor<T> w = tr.terms[q - 1];
    const T k = model::order_weight<T>(q);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = w[i] * k;
      rsum[i] = rsum[i] + w[i];
    }
    ex.grids.emplace_back("order_" + std::to_string(q), model::to_spectrogram(w));
  }
  ex.grids.emplace_back("residual_sum", model::to_spectrogram(rsum));
  ex.grids.emplace_back("estimate", model::to_spectrogram(tr.estimate));
  return ex;
}

inline void write_spectrogram_csv(const std::filesystem::path& path,
                                  const dsp::ComplexSpectrogram& s) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "frame,bin,real,imag\n";
  char buf[96];
  for (std::size_t t = 0; t < s.frames(); ++t)
    for (std::size_t k = 0; k < s.bins(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g\n", t, k, s.real(t, k), s.imag(t, k));
      os << buf;
    }
  if (!os) throw DataError("short write on " + path.string());
}

inline dsp::ComplexSpectrogram read_spectrogram_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "frame,bin,real,imag") throw DataError(path.string() + ": bad header");
  std::vector<std::tuple<std::size_t, std::size_t, double, double>> cells;
  std::size_t frames = 0, bins = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t t, k;
    double re, im;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf", &t, &k, &re, &im) != 4)
      throw DataError(path.string() + ": bad row '" + line + "'");
    frames = std::max(frames, t + 1);
    bins = std::max(bins, k + 1);
    cells.emplace_back(t, k, re, im);
  }
  dsp::ComplexSpectrogram s(frames, bins);
  for (const auto& [t, k, re, im] : cells) {
    s.real(t, k) = re;
    s.imag(t, k) = im;
  }
  return s;
}

// Plain PGM of 20 log10 |s| over [-60, 0] dB; frequency increases upwards.
inline void write_magnitude_pgm(const std::filesystem::path& path,
                                const dsp::ComplexSpectrogram& s) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "P2\n" << s.frames() << ' ' << s.bins() << "\n255\n";
  for (std::size_t r = 0; r < s.bins(); ++r) {
    const std::size_t k = s.bins() - 1 - r;
    for (std::size_t t = 0; t < s.frames(); ++t) {
      const double m = std::abs(s.at(t * s.bins() + k));
      const double db = m > 0.0 ? 20.0 * std::log10(m) : -60.0;
      const double u = (std::clamp(db, -60.0, 0.0) + 60.0) / 60.0;
      os << static_cast<int>(std::lround(255.0 * u)) << (t + 1 < s.frames() ? ' ' : '\n');
    }
  }
  if (!os) throw DataError("short write on " + path.string());
}

}  // namespace taylorse
