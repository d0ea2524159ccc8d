// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>

#include "taylorse/dsp/stft.hpp"

namespace taylorse::metrics {

inline constexpr double kSisnrClamp = 100.0;
inline constexpr double kLsdFloor = 1e-8;

// Scale-invariant SNR in dB, clamped to +/-100.
inline double sisnr(const dsp::Waveform& estimate, const dsp::Waveform& reference,
                    bool zero_mean = true) {
  const std::size_t n = reference.size();
  if (estimate.size() != n)
    throw DataError("sisnr: estimate has " + std::to_string(estimate.size()) +
                    " samples, reference " + std::to_string(n));
  std::vector<double> e = estimate.samples, s = reference.samples;
  if (zero_mean && n > 0) {
    const double me = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(n);
    const double ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
    for (auto& v : e) v -= me;
    for (auto& v : s) v -= ms;
  }
  double ss = 0.0, es = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss += s[i] * s[i];
    es += e[i] * s[i];
  }
  if (!(ss > 0.0)) throw DataError("sisnr: reference signal is all zero");
  const double a = es / ss;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a * s[i];
    target += t * t;
    noise += (e[i] - t) * (e[i] - t);
  }
  if (noise == 0.0) return target > 0.0 ? kSisnrClamp : -kSisnrClamp;
  if (target == 0.0) return -kSisnrClamp;
  return std::clamp(10.0 * std::log10(target / noise), -kSisnrClamp, kSisnrClamp);
}

// sqrt(mean_t d_t^2), d_t^2 = mean_k (20 log10 |E| - 20 log10 |S|)^2
inline double log_spectral_distance(const dsp::Waveform& estimate, const dsp::Waveform& reference,
                                    const dsp::AnalysisConfig& cfg = {}, double floor = kLsdFloor) {
  if (estimate.size() != reference.size())
    throw DataError("lsd: estimate has " + std::to_string(estimate.size()) +
                    " samples, reference " + std::to_string(reference.size()));
  const auto me = dsp::magnitude(dsp::stft(estimate, cfg));
  const auto ms = dsp::magnitude(dsp::stft(reference, cfg));
  double acc = 0.0;
  for (std::size_t t = 0; t < me.frames; ++t) {
    double f = 0.0;
    for (std::size_t k = 0; k < me.bins; ++k) {
      const double d = 20.0 * (std::log10(std::max(me(t, k), floor)) -
                               std::log10(std::max(ms(t, k), floor)));
      f += d * d;
    }
    acc += f / static_cast<double>(me.bins);
  }
  return std::sqrt(acc / static_cast<double>(me.frames));
}

// Smallest fraction of cells whose energy adds up to `share` of the total
// (0 for an all-zero grid). Lower means sparser.
inline double energy_cell_fraction(const dsp::ComplexSpectrogram& s, double share = 0.9) {
  std::vector<double> e(s.cells());
  for (std::size_t i = 0; i < s.cells(); ++i) e[i] = std::norm(s.at(i));
  std::sort(e.begin(), e.end(), std::greater<>());
  const double total = std::accumulate(e.begin(), e.end(), 0.0);
  if (!(total > 0.0) || e.empty()) return 0.0;
  double acc = 0.0;
  std::size_t k = 0;
  while (k < e.size() && acc < share * total) acc += e[k++];
  return static_cast<double>(k) / static_cast<double>(e.size());
}

struct MetricRow {
  std::string utt_id;
  double sisnr_db = 0.0;
  double lsd_db = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  void add(std::string id, double sisnr_db, double lsd_db) {
    rows.push_back({std::move(id), sisnr_db, lsd_db});
  }

  // Arithmetic mean over rows whose id ends with `suffix` (all rows if empty).
  MetricRow mean(const std::string& suffix = "") const {
    MetricRow m{"mean" + suffix, 0.0, 0.0};
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (!r.utt_id.ends_with(suffix)) continue;
      m.sisnr_db += r.sisnr_db;
      m.lsd_db += r.lsd_db;
      ++n;
    }
    if (n > 0) {
      m.sisnr_db /= static_cast<double>(n);
      m.lsd_db /= static_cast<double>(n);
    }
    return m;
  }

  void write_csv(std::ostream& os, const std::vector<MetricRow>& extra = {}) const {
    os << "utt_id,sisnr_db,lsd_db\n";
    char buf[64];
    auto put = [&](const MetricRow& r) {
      os << r.utt_id;
      std::snprintf(buf, sizeof buf, ",%.6f", r.sisnr_db);
      os << buf;
      std::snprintf(buf, sizeof buf, ",%.6f\n", r.lsd_db);
      os << buf;
    };
    for (const auto& r : rows) put(r);
    for (const auto& r : extra) put(r);
  }
};

}  // namespace taylorse::metrics
