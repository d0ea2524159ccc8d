// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Taylor-unfolding enhancement network.
//
//   M       = sigmoid(ZeroOrderNet(|X|))        gain in (0,1)
//   T0      = M |X| e^{j theta_X}               coarse spectrum
//   R       = HighOrderEncoder(X)
//   P_q     = G_q(concat(T_q, R))
//   T_{q+1} = q T_q + P_q
//   S       = T0 + sum_{q=1..Q} T_q / q!
//
// All spectra are [N, 2, L, K] tensors (real and imaginary planes) in the
// compressed domain.

#include <filesystem>

#include "taylorse/autodiff/checkpoint.hpp"
#include "taylorse/dsp/stft.hpp"
#include "taylorse/model/config.hpp"
#include "taylorse/model/layers.hpp"

namespace taylorse::model {

// Per-order terms of one forward pass. terms[q-1] holds T_q (unweighted).
template <class T>
struct OrderTrace {
  Tensor<T> gain;
  Tensor<T> coarse;
  std::vector<Tensor<T>> terms;
  Tensor<T> estimate;
};

template <class T>
T order_weight(std::size_t q) {
  double f = 1.0;
  for (std::size_t i = 2; i <= q; ++i) f *= static_cast<double>(i);
  return static_cast<T>(1.0 / f);
}

// T_{q+1} = q T_q + P_q
template <class T>
Var<T> recursion_step(const Var<T>& t, const Var<T>& p, std::size_t q) {
  return ad::add(ad::scale(t, static_cast<T>(q)), p);
}

template <class T>
Var<T> superimpose(const Var<T>& coarse, const std::vector<Var<T>>& terms) {
  Var<T> s = coarse;
  for (std::size_t q = 1; q <= terms.size(); ++q)
    s = ad::add(s, ad::scale(terms[q - 1], order_weight<T>(q)));
  return s;
}

// Same arithmetic as the tape version, on a recorded trace.
template <class T>
Tensor<T> superimpose(const OrderTrace<T>& tr, std::size_t q_expected) {
  if (tr.terms.size() != q_expected)
    throw std::invalid_argument("superimpose: trace holds " + std::to_string(tr.terms.size()) +
                                " terms, expected " + std::to_string(q_expected));
  Tensor<T> s = tr.coarse;
  for (std::size_t q = 1; q <= tr.terms.size(); ++q) {
    const Tensor<T>& t = tr.terms[q - 1];
    ad::require_shape(t.shape(), s.shape(), "superimpose");
    const T w = order_weight<T>(q);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = s[i] + t[i] * w;
  }
  return s;
}

template <class T>
class TaylorModel {
 public:
  struct Output {
    Var<T> gain;
    Var<T> coarse;
    std::vector<Var<T>> terms;
    Var<T> estimate;
  };

  explicit TaylorModel(TaylorConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    init(rng);
  }

  TaylorModel(TaylorConfig cfg, ParamStore<T> params) : TaylorModel(std::move(cfg), 0) {
    for (const auto& [name, p] : params)
      if (!params_.contains(name))
        throw DataError("checkpoint parameter '" + name + "' does not belong to the model config");
    for (auto& [name, p] : params_) {
      if (!params.contains(name))
        throw DataError("checkpoint lacks parameter '" + name + "'");
      const Tensor<T>& v = params.value(name);
      if (v.shape() != p.value.shape())
        throw DataError("checkpoint parameter '" + name + "' has shape " +
                        ad::to_string(v.shape()) + ", model expects " +
                        ad::to_string(p.value.shape()));
      p.value = v;
    }
  }

  const TaylorConfig& config() const noexcept { return cfg_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  std::size_t count_params() const { return params_.count(); }

  // Gain M [N,1,L,K] from the magnitude |X| [N,1,L,K].
  Var<T> zero_order(Tape<T>& tape, const Var<T>& mag) {
    const Ctx<T> c{tape, params_};
    const auto f = cfg_.encoder_bins();
    const std::size_t n = cfg_.unet_depths.size();
    std::vector<Var<T>> skips;
    Var<T> h = mag;
    for (std::size_t i = 0; i < n; ++i) {
      h = rel(i)(c, h, halving_spec(f[i]));
      if (cfg_.unet_depths[i] > 0) h = ad::add(h, rel_unet(i)(c, h));
      skips.push_back(h);
    }
    Var<T> d = from_features(bottleneck()(c, to_features(h)), cfg_.channels, f[n]);
    for (std::size_t i = n; i-- > 0;) {
      d = rdl(i)(c, ad::concat<T>({d, skips[i]}, 1), halving_spec(f[i]), f[i]);
      if (cfg_.unet_depths[i] > 0) d = ad::add(d, rdl_unet(i)(c, d));
    }
    return ad::sigmoid(ad::conv2d(d, c.p("zero/out/w"), c.p("zero/out/b"), Conv2dSpec{}));
  }

  // M |X| e^{j theta_X} = M X on the RI planes.
  static Var<T> coarse_spectrum(const Var<T>& gain, const Var<T>& x) {
    if (gain.dim(1) != 1 || x.dim(1) != 2)
      throw std::invalid_argument("coarse_spectrum: expected [N,1,L,K] gain and [N,2,L,K] input");
    return ad::mul(x, ad::concat<T>({gain, gain}, 1));
  }

  // Feature map R [N,Cr,L,K] from the RI planes.
  Var<T> high_order_encode(Tape<T>& tape, const Var<T>& x) {
    const Ctx<T> c{tape, params_};
    Var<T> h = x;
    for (std::size_t j = 0; j < 3; ++j) h = encoder_block(j)(c, h, Conv2dSpec{1, 1, 1, 1, 1});
    return h;
  }

  // P_q = G_q(concat(T_q, R)); [N,2,L,K].
  Var<T> derivative_step(Tape<T>& tape, const Var<T>& t, const Var<T>& r, std::size_t q) {
    if (q >= cfg_.q)
      throw std::out_of_range("derivative_step: order " + std::to_string(q) +
                              " outside [0, " + std::to_string(cfg_.q) + ")");
    const Ctx<T> c{tape, params_};
    const std::string pre = deriv_prefix(q);
    const std::size_t k = cfg_.bins;
    Var<T> h = to_features(ad::concat<T>({t, r}, 1));
    h = ad::conv1d_causal(h, c.p(pre + "/in/w"), c.p(pre + "/in/b"));
    h = deriv_tcn(pre)(c, h);
    h = ad::conv1d_causal(h, c.p(pre + "/out/w"), c.p(pre + "/out/b"));
    return from_features(h, 2, k);
  }

  // x: compressed RI spectra [N,2,L,K].
  Output forward(Tape<T>& tape, const Tensor<T>& x) {
    if (x.shape().size() != 4 || x.dim(1) != 2 || x.dim(3) != cfg_.bins)
      throw std::invalid_argument("forward: expected [N,2,L," + std::to_string(cfg_.bins) +
                                  "], got " + ad::to_string(x.shape()));
    if (!x.all_finite()) throw NumericError("forward: input spectrum is not finite");
    Output out;
    Var<T> xv = tape.constant(x);
    out.gain = zero_order(tape, tape.constant(magnitude_of(x)));
    out.coarse = coarse_spectrum(out.gain, xv);
    if (cfg_.q > 0) {
      Var<T> r = high_order_encode(tape, xv);
      Var<T> t = out.coarse;
      for (std::size_t q = 0; q < cfg_.q; ++q) {
        t = recursion_step(t, derivative_step(tape, t, r, q), q);
        out.terms.push_back(t);
      }
    }
    out.estimate = superimpose(out.coarse, out.terms);
    return out;
  }

  OrderTrace<T> trace(const Tensor<T>& x) {
    Tape<T> tape(false);
    Output o = forward(tape, x);
    OrderTrace<T> tr{o.gain.value(), o.coarse.value(), {}, o.estimate.value()};
    for (const auto& t : o.terms) tr.terms.push_back(t.value());
    return tr;
  }

  // |X| [N,1,L,K] of RI spectra [N,2,L,K].
  static Tensor<T> magnitude_of(const Tensor<T>& x) {
    const std::size_t n = x.dim(0), cells = x.dim(2) * x.dim(3);
    Tensor<T> m({n, 1, x.dim(2), x.dim(3)});
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < cells; ++i) {
        const T re = x[b * 2 * cells + i], im = x[(b * 2 + 1) * cells + i];
        m[b * cells + i] = std::sqrt(re * re + im * im);
      }
    return m;
  }

  void save(const std::filesystem::path& path) const {
    nlohmann::json j = cfg_;
    ad::save_checkpoint(path, params_, j);
  }

  static TaylorModel load(const std::filesystem::path& path) {
    auto data = ad::load_checkpoint(path);
    TaylorConfig cfg;
    try {
      cfg = data.config.template get<TaylorConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint " + path.string() + ": bad model config: " + e.what());
    }
    try {
      cfg.validate();
    } catch (const UsageError& e) {
      throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    return TaylorModel(cfg, data.params.template cast<T>());
  }

  std::string deriv_prefix(std::size_t q) const {
    return cfg_.shared_high_order ? "high/deriv/shared" : "high/deriv/" + std::to_string(q);
  }

 private:
  ConvBlock2d rel(std::size_t i) const {
    return {"zero/rel" + std::to_string(i), i == 0 ? 1 : cfg_.channels, cfg_.channels, 1, 3,
            false, true};
  }
  UNetBlock rel_unet(std::size_t i) const {
    return {"zero/rel" + std::to_string(i) + "/unet", cfg_.unet_depths[i], cfg_.channels};
  }
  ConvBlock2d rdl(std::size_t i) const {
    return {"zero/rdl" + std::to_string(i), 2 * cfg_.channels, cfg_.channels, 1, 3, true, true};
  }
  UNetBlock rdl_unet(std::size_t i) const {
    return {"zero/rdl" + std::to_string(i) + "/unet", cfg_.unet_depths[i], cfg_.channels};
  }
  STCN bottleneck() const {
    return {"zero/stcn", cfg_.channels * cfg_.encoder_bins().back(), cfg_.stcm_squeeze,
            cfg_.stcm_kernel, cfg_.stcm_groups, cfg_.stcm_per_group, cfg_.stcm_dilations};
  }
  ConvBlock2d encoder_block(std::size_t j) const {
    const std::size_t r = cfg_.residual_channels();
    return {"high/enc/b" + std::to_string(j), j == 0 ? 2 : r, r, 2, 3, false, true};
  }
  STCN deriv_tcn(const std::string& pre) const {
    return {pre + "/stcn", cfg_.deriv_features, cfg_.stcm_squeeze, cfg_.stcm_kernel,
            cfg_.stcm_groups, cfg_.stcm_per_group, cfg_.stcm_dilations};
  }

  void init(std::mt19937_64& rng) {
    const std::size_t n = cfg_.unet_depths.size();
    for (std::size_t i = 0; i < n; ++i) {
      rel(i).init(params_, rng);
      if (cfg_.unet_depths[i] > 0) rel_unet(i).init(params_, rng);
    }
    bottleneck().init(params_, rng);
    for (std::size_t i = n; i-- > 0;) {
      rdl(i).init(params_, rng);
      if (cfg_.unet_depths[i] > 0) rdl_unet(i).init(params_, rng);
    }
    init::conv(params_, rng, "zero/out", {1, cfg_.channels, 1, 1}, cfg_.channels, 1);
    if (cfg_.q == 0) return;
    for (std::size_t j = 0; j < 3; ++j) encoder_block(j).init(params_, rng);
    const std::size_t modules = cfg_.shared_high_order ? 1 : cfg_.q;
    const std::size_t in = (2 + cfg_.residual_channels()) * cfg_.bins;
    const std::size_t d = cfg_.deriv_features;
    for (std::size_t q = 0; q < modules; ++q) {
      const std::string pre = deriv_prefix(q);
      init::conv(params_, rng, pre + "/in", {d, in, 1}, in, d);
      deriv_tcn(pre).init(params_, rng);
      init::conv(params_, rng, pre + "/out", {2 * cfg_.bins, d, 1}, d, 2 * cfg_.bins);
    }
  }

  TaylorConfig cfg_;
  ParamStore<T> params_;
};

// Spectrogram batch <-> [N,2,L,K] tensor.
template <class T>
Tensor<T> to_tensor(const std::vector<dsp::ComplexSpectrogram>& specs) {
  if (specs.empty()) throw std::invalid_argument("to_tensor: empty batch");
  const std::size_t l = specs[0].frames(), k = specs[0].bins(), cells = l * k;
  Tensor<T> t({specs.size(), 2, l, k});
  for (std::size_t b = 0; b < specs.size(); ++b) {
    if (specs[b].frames() != l || specs[b].bins() != k)
      throw std::invalid_argument("to_tensor: spectrogram shapes differ within a batch");
    for (std::size_t i = 0; i < cells; ++i) {
      t[(2 * b) * cells + i] = static_cast<T>(specs[b].real.v[i]);
      t[(2 * b + 1) * cells + i] = static_cast<T>(specs[b].imag.v[i]);
    }
  }
  return t;
}

template <class T>
Tensor<T> to_tensor(const dsp::ComplexSpectrogram& spec) {
  return to_tensor<T>(std::vector<dsp::ComplexSpectrogram>{spec});
}

// Item b of a [N,2,L,K] (or [N,1,L,K] real) tensor.
template <class T>
dsp::ComplexSpectrogram to_spectrogram(const Tensor<T>& t, std::size_t b = 0) {
  const std::size_t planes = t.dim(1), l = t.dim(2), k = t.dim(3), cells = l * k;
  if (b >= t.dim(0) || planes > 2) throw std::invalid_argument("to_spectrogram: bad batch item");
  dsp::ComplexSpectrogram s(l, k);
  for (std::size_t i = 0; i < cells; ++i) {
    s.real.v[i] = static_cast<double>(t[(planes * b) * cells + i]);
    if (planes == 2) s.imag.v[i] = static_cast<double>(t[(planes * b + 1) * cells + i]);
  }
  return s;
}

}  // namespace taylorse::model
