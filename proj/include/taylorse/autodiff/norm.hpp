// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cmath>

#include "taylorse/autodiff/tape.hpp"

namespace taylorse::ad {

namespace detail {

// Normalizes `groups` sets of `count` elements, element j of group g living
// at offset(g) + j * stride. channel(g, j) selects the affine parameters.
template <class T, class Offset, class Channel>
Var<T> grouped_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    T eps, std::size_t groups, std::size_t count,
                    std::size_t stride, Offset offset, Channel channel) {
  if (!(eps > T(0))) throw std::invalid_argument("norm: eps must be > 0");
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Tensor<T> xhat(xv.shape());
  Tensor<T> out(xv.shape());
  std::vector<T> inv_std(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t o = offset(g);
    T mu = 0;
    for (std::size_t j = 0; j < count; ++j) mu += xv[o + j * stride];
    mu /= static_cast<T>(count);
    T var = 0;
    for (std::size_t j = 0; j < count; ++j) {
      const T d = xv[o + j * stride] - mu;
      var += d * d;
    }
    var /= static_cast<T>(count);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[g] = is;
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = o + j * stride;
      const std::size_t c = channel(g, j);
      xhat[i] = (xv[i] - mu) * is;
      out[i] = gv[c] * xhat[i] + bv[c];
    }
  }
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor<T>& g) {
        const auto& gv = gamma.value();
        Tensor<T>* gx = x.requires_grad() ? &x.tape().grad_ref(x) : nullptr;
        Tensor<T>* gg = gamma.requires_grad() ? &gamma.tape().grad_ref(gamma) : nullptr;
        Tensor<T>* gb = beta.requires_grad() ? &beta.tape().grad_ref(beta) : nullptr;
        std::vector<T> dxhat(count);
        for (std::size_t grp = 0; grp < groups; ++grp) {
          const std::size_t o = offset(grp);
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < count; ++j) {
            const std::size_t i = o + j * stride;
            const std::size_t c = channel(grp, j);
            if (gg) (*gg)[c] += g[i] * xhat[i];
            if (gb) (*gb)[c] += g[i];
            dxhat[j] = g[i] * gv[c];
            m1 += dxhat[j];
            m2 += dxhat[j] * xhat[i];
          }
          if (!gx) continue;
          m1 /= static_cast<T>(count);
          m2 /= static_cast<T>(count);
          for (std::size_t j = 0; j < count; ++j) {
            const std::size_t i = o + j * stride;
            (*gx)[i] += inv_std[grp] * (dxhat[j] - m1 - xhat[i] * m2);
          }
        }
      });
}

}  // namespace detail

// Instance normalization of x[N,C,T,F]. Statistics are taken over the
// frequency axis of each (sample, channel, frame) so that no frame sees
// its successors; gamma and beta are per channel.
template <class T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("instance_norm: expects [N,C,T,F]");
  const std::size_t c = s[1], t = s[2], f = s[3];
  require_shape(gamma.shape(), {c}, "instance_norm gamma");
  require_shape(beta.shape(), {c}, "instance_norm beta");
  const std::size_t groups = s[0] * c * t;
  return detail::grouped_norm(
      x, gamma, beta, eps, groups, f, 1, [f](std::size_t g) { return g * f; },
      [c, t](std::size_t g, std::size_t) { return (g / t) % c; });
}

// Per-frame normalization across channels of x[N,C,T].
template <class T>
Var<T> channel_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw std::invalid_argument("channel_norm: expects [N,C,T]");
  const std::size_t c = s[1], t = s[2];
  require_shape(gamma.shape(), {c}, "channel_norm gamma");
  require_shape(beta.shape(), {c}, "channel_norm beta");
  return detail::grouped_norm(
      x, gamma, beta, eps, s[0] * t, c, t,
      [c, t](std::size_t g) { return (g / t) * c * t + g % t; },
      [](std::size_t, std::size_t j) { return j; });
}

}  // namespace taylorse::ad
