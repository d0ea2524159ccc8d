// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Building blocks of the network. Each layer owns a name prefix into a
// ParamStore: init() registers its parameters, operator() applies it on a
// tape.

#include <random>

#include "taylorse/autodiff/conv.hpp"
#include "taylorse/autodiff/norm.hpp"
#include "taylorse/autodiff/params.hpp"

namespace taylorse::model {

using ad::Conv2dSpec;
using ad::ParamStore;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

template <class T>
struct Ctx {
  Tape<T>& tape;
  ParamStore<T>& params;
  Var<T> p(const std::string& name) const { return params.use(tape, name); }
};

namespace init {

template <class T>
void conv(ParamStore<T>& ps, std::mt19937_64& rng, const std::string& pre, Shape w,
          std::size_t fan_in, std::size_t bias) {
  ps.add(pre + "/w", ad::fan_in_uniform<T>(std::move(w), fan_in, rng));
  ps.add(pre + "/b", Tensor<T>({bias}));
}

template <class T>
void norm(ParamStore<T>& ps, const std::string& pre, std::size_t c) {
  ps.add(pre + "/gamma", Tensor<T>({c}, T(1)));
  ps.add(pre + "/beta", Tensor<T>({c}));
}

template <class T>
void prelu(ParamStore<T>& ps, const std::string& pre, std::size_t c) {
  ps.add(pre + "/slope", Tensor<T>({c}, T(0.25)));
}

}  // namespace init

// Stride-2 frequency downsampling keeps floor(F/2) bins: even inputs get one
// bin of zero padding on the high side.
inline Conv2dSpec halving_spec(std::size_t f) {
  return Conv2dSpec{1, 2, 1, 0, f % 2 == 0 ? 1u : 0u};
}

// [N,C,T,F] -> [N,C*F,T]
template <class T>
Var<T> to_features(const Var<T>& x) {
  const Shape& s = x.shape();
  return ad::reshape(ad::swap12(ad::reshape(x, {s[0] * s[1], s[2], s[3]})),
                     {s[0], s[1] * s[3], s[2]});
}

// [N,C*F,T] -> [N,C,T,F]
template <class T>
Var<T> from_features(const Var<T>& y, std::size_t c, std::size_t f) {
  const Shape& s = y.shape();
  if (s[1] != c * f) throw std::invalid_argument("from_features: width mismatch");
  return ad::reshape(ad::swap12(ad::reshape(y, {s[0] * c, f, s[2]})), {s[0], c, s[2], f});
}

// Split of a 2C-channel conv output into a gated linear unit.
template <class T>
Var<T> glu_channels(const Var<T>& y) {
  const std::size_t c2 = y.dim(1);
  return ad::glu(ad::slice(y, 1, 0, c2 / 2), ad::slice(y, 1, c2 / 2, c2));
}

// conv (or transposed conv) -> [GLU] -> IN -> PReLU
struct ConvBlock2d {
  std::string pre;
  std::size_t cin = 0, cout = 0, kt = 1, kf = 3;
  bool transposed = false;
  bool gated = false;

  std::size_t conv_out() const { return gated ? 2 * cout : cout; }

  template <class T>
  void init(ParamStore<T>& ps, std::mt19937_64& rng) const {
    const std::size_t k = kt * kf;
    if (transposed)
      init::conv(ps, rng, pre + "/conv", {cin, conv_out(), kt, kf}, cin * k, conv_out());
    else
      init::conv(ps, rng, pre + "/conv", {conv_out(), cin, kt, kf}, cin * k, conv_out());
    init::norm(ps, pre + "/norm", cout);
    init::prelu(ps, pre + "/act", cout);
  }

  // out_f is used by transposed blocks only.
  template <class T>
  Var<T> operator()(const Ctx<T>& c, const Var<T>& x, const Conv2dSpec& spec,
                    std::size_t out_f = 0) const {
    Var<T> y = transposed
                   ? ad::conv_transpose2d(x, c.p(pre + "/conv/w"), c.p(pre + "/conv/b"), spec, out_f)
                   : ad::conv2d(x, c.p(pre + "/conv/w"), c.p(pre + "/conv/b"), spec);
    if (gated) y = glu_channels(y);
    y = ad::instance_norm(y, c.p(pre + "/norm/gamma"), c.p(pre + "/norm/beta"), T(1e-5));
    return ad::prelu(y, c.p(pre + "/act/slope"));
  }
};

// Encoder-decoder over frequency with skip connections; output has the
// input's shape. Kernel (2,3), causal in time.
struct UNetBlock {
  std::string pre;
  std::size_t depth = 0, channels = 0;

  ConvBlock2d enc(std::size_t j) const {
    return {pre + "/enc" + std::to_string(j), channels, channels, 2, 3, false, false};
  }
  ConvBlock2d dec(std::size_t j) const {
    const std::size_t cin = j == depth ? channels : 2 * channels;
    return {pre + "/dec" + std::to_string(j), cin, channels, 2, 3, true, false};
  }

  template <class T>
  void init(ParamStore<T>& ps, std::mt19937_64& rng) const {
    for (std::size_t j = 1; j <= depth; ++j) enc(j).init(ps, rng);
    for (std::size_t j = depth; j >= 1; --j) dec(j).init(ps, rng);
  }

  template <class T>
  Var<T> operator()(const Ctx<T>& c, const Var<T>& x) const {
    std::vector<Var<T>> e{x};
    for (std::size_t j = 1; j <= depth; ++j)
      e.push_back(enc(j)(c, e.back(), halving_spec(e.back().dim(3))));
    Var<T> d = e.back();
    for (std::size_t j = depth; j >= 1; --j) {
      Var<T> in = j == depth ? d : ad::concat<T>({d, e[j]}, 1);
      const std::size_t f = e[j - 1].dim(3);
      d = dec(j)(c, in, halving_spec(f), f);
    }
    return d;
  }
};

// Squeezed temporal convolution module over [N,D,T]:
//   x + out(norm(prelu(glu(dconv_a(u), dconv_b(u))))),  u = norm(prelu(in(x)))
struct STCM {
  std::string pre;
  std::size_t features = 0, squeeze = 0, kernel = 5, dilation = 1;

  template <class T>
  void init(ParamStore<T>& ps, std::mt19937_64& rng) const {
    init::conv(ps, rng, pre + "/in", {squeeze, features, 1}, features, squeeze);
    init::prelu(ps, pre + "/act1", squeeze);
    init::norm(ps, pre + "/norm1", squeeze);
    init::conv(ps, rng, pre + "/dconv", {2 * squeeze, squeeze, kernel}, squeeze * kernel,
               2 * squeeze);
    init::prelu(ps, pre + "/act2", squeeze);
    init::norm(ps, pre + "/norm2", squeeze);
    init::conv(ps, rng, pre + "/out", {features, squeeze, 1}, squeeze, features);
  }

  template <class T>
  Var<T> operator()(const Ctx<T>& c, const Var<T>& x) const {
    Var<T> u = ad::conv1d_causal(x, c.p(pre + "/in/w"), c.p(pre + "/in/b"));
    u = ad::channel_norm(ad::prelu(u, c.p(pre + "/act1/slope")), c.p(pre + "/norm1/gamma"),
                         c.p(pre + "/norm1/beta"), T(1e-5));
    Var<T> g = glu_channels(
        ad::conv1d_causal(u, c.p(pre + "/dconv/w"), c.p(pre + "/dconv/b"), dilation));
    g = ad::channel_norm(ad::prelu(g, c.p(pre + "/act2/slope")), c.p(pre + "/norm2/gamma"),
                         c.p(pre + "/norm2/beta"), T(1e-5));
    return ad::add(x, ad::conv1d_causal(g, c.p(pre + "/out/w"), c.p(pre + "/out/b")));
  }
};

// Stack of groups x per_group S-TCMs cycling through the dilation list.
struct STCN {
  std::string pre;
  std::size_t features = 0, squeeze = 0, kernel = 5, groups = 1, per_group = 4;
  std::vector<std::size_t> dilations;

  std::vector<STCM> modules() const {
    std::vector<STCM> m;
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t j = 0; j < per_group; ++j)
        m.push_back({pre + "/g" + std::to_string(g) + "/m" + std::to_string(j), features,
                     squeeze, kernel, dilations[j % dilations.size()]});
    return m;
  }

  template <class T>
  void init(ParamStore<T>& ps, std::mt19937_64& rng) const {
    for (const auto& m : modules()) m.init(ps, rng);
  }

  template <class T>
  Var<T> operator()(const Ctx<T>& c, Var<T> x) const {
    for (const auto& m : modules()) x = m(c, x);
    return x;
  }
};

}  // namespace taylorse::model
