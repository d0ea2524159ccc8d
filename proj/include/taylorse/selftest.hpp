// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Invariant checks that need no data: gradients, STFT round trip, model
// causality, superposition replay and parameter-count laws.

#include <cstdio>
#include <functional>
#include <ostream>

#include "taylorse/autodiff/grad_suite.hpp"
#include "taylorse/model/taylor.hpp"

namespace taylorse::selftest {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Result {
  std::string name;
  bool passed = false;
  std::string detail;
};

template <class T>
Result gradient_suite(std::size_t seeds = 20) {
  Result r{std::string("gradients/") + (sizeof(T) == 4 ? "float32" : "float64"), true, ""};
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= seeds; ++s)
    for (const auto& c : ad::gradient_cases<T>(s)) {
      const auto rep = ad::check_case(c, s);
      worst = std::max(worst, rep.max_rel_error);
      if (!rep.passed() && r.passed) {
        r.passed = false;
        r.detail = c.name + " seed " + std::to_string(s) + ": " + rep.worst;
      }
    }
  if (r.passed) r.detail = "max rel err " + sci(worst);
  return r;
}

inline Result stft_round_trip(std::size_t n = 20) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dsp::Waveform w;
    w.samples.resize(dsp::kDefaultSampleRate);
    for (auto& v : w.samples) v = u(rng);
    const auto back = dsp::istft(dsp::stft(w));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      num += (back.samples[j] - w.samples[j]) * (back.samples[j] - w.samples[j]);
      den += w.samples[j] * w.samples[j];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return {"stft_round_trip", worst <= 1e-6, "max rel L2 " + sci(worst)};
}

inline model::TaylorConfig small_config(std::size_t q, bool shared = false) {
  model::TaylorConfig c;
  c.q = q;
  c.shared_high_order = shared;
  c.channels = 4;
  c.unet_depths = {1, 0};
  c.stcm_groups = 1;
  c.stcm_per_group = 2;
  c.stcm_dilations = {1, 2};
  c.stcm_squeeze = 4;
  c.deriv_features = 8;
  c.bins = 17;
  return c;
}

inline ad::Tensor<double> random_input(std::size_t l, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ad::Tensor<double> x({1, 2, l, k});
  for (auto& v : x.data()) v = u(rng);
  return x;
}

inline Result causality() {
  double worst = 0.0;
  for (std::size_t q : {0, 1, 3}) {
    model::TaylorModel<double> m(small_config(q), 5 + q);
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
      const std::size_t l = 12, k = 17, t0 = 2 + 3 * trial;
      auto x = random_input(l, k, 100 * q + trial);
      auto y = x;
      std::mt19937_64 rng(trial);
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t t = t0 + 1; t < l; ++t)
          for (std::size_t f = 0; f < k; ++f) y[(p * l + t) * k + f] = u(rng);
      const auto a = m.trace(x).estimate, b = m.trace(y).estimate;
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t t = 0; t <= t0; ++t)
          for (std::size_t f = 0; f < k; ++f) {
            const std::size_t i = (p * l + t) * k + f;
            worst = std::max(worst, std::abs(a[i] - b[i]));
          }
    }
  }
  return {"causality", worst <= 1e-12, "max past-frame change " + sci(worst)};
}

inline Result superposition() {
  model::TaylorModel<float> m(small_config(3), 9);
  ad::Tensor<float> x({1, 2, 8, 17});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : x.data()) v = u(rng);
  const auto tr = m.trace(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = tr.coarse[i];
    for (std::size_t q = 1; q <= tr.terms.size(); ++q)
      s += static_cast<double>(tr.terms[q - 1][i]) * static_cast<double>(model::order_weight<float>(q));
    worst = std::max(worst, std::abs(s - static_cast<double>(tr.estimate[i])));
  }
  return {"superposition", worst <= 1e-5, "max |sum - estimate| " + sci(worst)};
}

inline Result parameter_laws() {
  std::vector<std::size_t> shared, separate;
  for (std::size_t q = 1; q <= 5; ++q) {
    separate.push_back(model::TaylorModel<float>(small_config(q), 1).count_params());
    shared.push_back(model::TaylorModel<float>(small_config(q, true), 1).count_params());
  }
  bool ok = std::all_of(shared.begin(), shared.end(), [&](std::size_t c) { return c == shared[0]; });
  const std::size_t slope = separate[1] - separate[0];
  for (std::size_t q = 1; q < separate.size(); ++q) ok = ok && separate[q] - separate[q - 1] == slope;
  ok = ok && shared[0] == separate[0];
  return {"parameter_laws", ok, "per-order size " + std::to_string(slope)};
}

inline std::vector<Result> run_all(std::ostream* log = nullptr) {
  const std::vector<std::function<Result()>> checks{
      [] { return gradient_suite<float>(); }, [] { return gradient_suite<double>(); },
      [] { return stft_round_trip(); }, causality, superposition, parameter_laws};
  std::vector<Result> out;
  for (const auto& c : checks) {
    out.push_back(c());
    if (log)
      *log << (out.back().passed ? "PASS " : "FAIL ") << out.back().name << ": "
           << out.back().detail << '\n';
  }
  return out;
}

}  // namespace taylorse::selftest
