// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// w_ri * MSE(RI planes) + w_mag * MSE(magnitudes), both on power-compressed
// spectra.

#include "taylorse/autodiff/ops.hpp"
#include "taylorse/dsp/stft.hpp"

namespace taylorse::train {

struct LossConfig {
  double beta = 0.5;
  double w_ri = 0.5;
  double w_mag = 0.5;
  double mag_eps = 1e-8;  // inside sqrt(re^2 + im^2 + eps)

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw UsageError("loss beta must be in (0, 1]");
    if (w_ri < 0.0 || w_mag < 0.0 || std::abs(w_ri + w_mag - 1.0) > 1e-12)
      throw UsageError("loss weights must be nonnegative and sum to 1");
  }
};

// est: compressed estimate on the tape, target: compressed clean spectra,
// both [N,2,L,K].
template <class T>
ad::Var<T> spectral_loss(const ad::Var<T>& est, const ad::Tensor<T>& target,
                         const LossConfig& cfg) {
  ad::require_shape(target.shape(), est.shape(), "spectral_loss");
  auto& tape = est.tape();
  auto tgt = tape.constant(target);
  const std::size_t re_end = 1, planes = 2;
  auto mag = [&](const ad::Var<T>& x) {
    return ad::magnitude(ad::slice(x, 1, 0, re_end), ad::slice(x, 1, re_end, planes),
                         static_cast<T>(cfg.mag_eps));
  };
  auto ri = ad::mse(est, tgt);
  auto mg = ad::mse(mag(est), mag(tgt));
  return ad::add(ad::scale(ri, static_cast<T>(cfg.w_ri)),
                 ad::scale(mg, static_cast<T>(cfg.w_mag)));
}

// Same loss on uncompressed spectrograms, in double precision.
inline double loss(const dsp::ComplexSpectrogram& est, const dsp::ComplexSpectrogram& clean,
                   const LossConfig& cfg = {}) {
  cfg.validate();
  if (!est.real.same_shape(clean.real)) throw std::invalid_argument("loss: shape mismatch");
  const auto a = dsp::compress(est, cfg.beta), b = dsp::compress(clean, cfg.beta);
  const std::size_t n = a.cells();
  double ri = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = a.real.v[i] - b.real.v[i], di = a.imag.v[i] - b.imag.v[i];
    ri += dr * dr + di * di;
    const double ma = std::sqrt(std::norm(a.at(i)) + cfg.mag_eps);
    const double mb = std::sqrt(std::norm(b.at(i)) + cfg.mag_eps);
    mg += (ma - mb) * (ma - mb);
  }
  return cfg.w_ri * ri / static_cast<double>(2 * n) + cfg.w_mag * mg / static_cast<double>(n);
}

}  // namespace taylorse::train
