// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Reference computations for the model written independently of the
// library's own composition code.

#include "taylorse/model/taylor.hpp"

namespace oracle {

using taylorse::model::TaylorConfig;

// Closed-form parameter counts.
inline std::size_t conv(std::size_t o, std::size_t i, std::size_t kt, std::size_t kf) {
  return o * i * kt * kf + o;
}
inline std::size_t glu_block(std::size_t cin, std::size_t c, std::size_t kt, std::size_t kf) {
  return conv(2 * c, cin, kt, kf) + 2 * c + c;
}
inline std::size_t plain_block(std::size_t cin, std::size_t c) { return conv(c, cin, 2, 3) + 3 * c; }
inline std::size_t unet(std::size_t d, std::size_t c) {
  if (d == 0) return 0;
  return d * plain_block(c, c) + plain_block(c, c) + (d - 1) * plain_block(2 * c, c);
}
inline std::size_t stcm(std::size_t d, std::size_t s, std::size_t k) {
  return conv(s, d, 1, 1) + s + 2 * s + conv(2 * s, s, 1, k) + s + 2 * s + conv(d, s, 1, 1);
}
inline std::size_t zero_order_count(const TaylorConfig& c) {
  std::size_t n = 0, f = c.bins;
  for (std::size_t i = 0; i < c.unet_depths.size(); ++i) {
    n += glu_block(i == 0 ? 1 : c.channels, c.channels, 1, 3) + unet(c.unet_depths[i], c.channels);
    n += glu_block(2 * c.channels, c.channels, 1, 3) + unet(c.unet_depths[i], c.channels);
    f /= 2;
  }
  n += c.stcm_groups * c.stcm_per_group * stcm(c.channels * f, c.stcm_squeeze, c.stcm_kernel);
  return n + c.channels + 1;
}
inline std::size_t encoder_count(const TaylorConfig& c) {
  const std::size_t r = c.channels / 4;
  return glu_block(2, r, 2, 3) + 2 * glu_block(r, r, 2, 3);
}
inline std::size_t deriv_count(const TaylorConfig& c) {
  const std::size_t r = c.channels / 4, d = c.deriv_features;
  return conv(d, (2 + r) * c.bins, 1, 1) +
         c.stcm_groups * c.stcm_per_group * stcm(d, c.stcm_squeeze, c.stcm_kernel) +
         conv(2 * c.bins, d, 1, 1);
}
inline std::size_t model_count(const TaylorConfig& c) {
  std::size_t n = zero_order_count(c);
  if (c.q > 0) n += encoder_count(c) + (c.shared_high_order ? 1 : c.q) * deriv_count(c);
  return n;
}

template <class T>
struct StraightLine {
  taylorse::ad::Tensor<T> coarse;
  std::vector<taylorse::ad::Tensor<T>> terms;
  taylorse::ad::Tensor<T> estimate;
};

// The forward stream written out step by step: each submodule runs on its own
// tape, the gain product, recursion and weighted sum are plain loops.
template <class T>
StraightLine<T> straight_line(taylorse::model::TaylorModel<T>& m, const taylorse::ad::Tensor<T>& x) {
  using taylorse::ad::Tape;
  using taylorse::ad::Tensor;
  Tape<T> tape(false);
  const Tensor<T> gain =
      m.zero_order(tape, tape.constant(taylorse::model::TaylorModel<T>::magnitude_of(x))).value();
  const std::size_t n = x.dim(0), cells = x.dim(2) * x.dim(3);
  StraightLine<T> out;
  out.coarse = Tensor<T>(x.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t i = 0; i < cells; ++i)
        out.coarse[(b * 2 + p) * cells + i] = x[(b * 2 + p) * cells + i] * gain[b * cells + i];
  out.estimate = out.coarse;
  const std::size_t q_total = m.config().q;
  if (q_total == 0) return out;
  const auto r = m.high_order_encode(tape, tape.constant(x));
  Tensor<T> t = out.coarse;
  double fact = 1.0;
  for (std::size_t q = 0; q < q_total; ++q) {
    const Tensor<T> p = m.derivative_step(tape, tape.constant(t), r, q).value();
    Tensor<T> next(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) next[i] = static_cast<T>(q) * t[i] + p[i];
    t = next;
    out.terms.push_back(t);
    fact *= static_cast<double>(q + 1);
    const T w = static_cast<T>(1.0 / fact);
    for (std::size_t i = 0; i < t.size(); ++i) out.estimate[i] = out.estimate[i] + t[i] * w;
  }
  return out;
}

}  // namespace oracle
