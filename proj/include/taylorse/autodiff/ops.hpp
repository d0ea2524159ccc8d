// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Elementwise, reduction and structural primitives with reverse-mode rules.

#include <cmath>
#include <vector>

#include "taylorse/autodiff/tape.hpp"

namespace taylorse::ad {

namespace detail {

template <class T>
T sigmoid(T x) {
  // Split form avoids overflow of exp for large |x|.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require_shape(b.shape(), a.shape(), op);
  if (&a.tape() != &b.tape())
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "add");
  Tensor<T> out = a.value();
  out += b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad()) a.tape().grad_ref(a) += g;
    if (b.requires_grad()) b.tape().grad_ref(b) += g;
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad()) a.tape().grad_ref(a) += g;
    if (b.requires_grad()) {
      auto& gb = b.tape().grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

// Hadamard product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (a.requires_grad()) {
      auto& ga = a.tape().grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto& gb = b.tape().grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.tape().record(std::move(out), {a}, [a, s](const Tensor<T>& g) {
    auto& ga = a.tape().grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <class T>
Var<T> square(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v * v;
  return a.tape().record(std::move(out), {a}, [a](const Tensor<T>& g) {
    const auto& av = a.value();
    auto& ga = a.tape().grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * av[i] * g[i];
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = detail::sigmoid(v);
  auto y = out;
  return a.tape().record(std::move(out), {a},
                         [a, y = std::move(y)](const Tensor<T>& g) {
                           auto& ga = a.tape().grad_ref(a);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] += g[i] * y[i] * (T(1) - y[i]);
                         });
}

// Gated linear unit: a * sigmoid(b).
template <class T>
Var<T> glu(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "glu");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor<T> gate(bv.shape());
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    gate[i] = detail::sigmoid(bv[i]);
    out[i] = av[i] * gate[i];
  }
  return a.tape().record(
      std::move(out), {a, b}, [a, b, gate = std::move(gate)](const Tensor<T>& g) {
        const auto& av = a.value();
        if (a.requires_grad()) {
          auto& ga = a.tape().grad_ref(a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * gate[i];
        }
        if (b.requires_grad()) {
          auto& gb = b.tape().grad_ref(b);
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[i] += g[i] * av[i] * gate[i] * (T(1) - gate[i]);
        }
      });
}

// Parametric ReLU with one slope per channel (axis 1). A slope tensor of
// size 1 is shared by all channels.
template <class T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  const auto& xv = x.value();
  if (xv.rank() < 2) throw std::invalid_argument("prelu: rank must be >= 2");
  const std::size_t n = xv.dim(0), c = xv.dim(1);
  const std::size_t inner = xv.size() / (n * c);
  const std::size_t ns = slope.value().size();
  if (ns != 1 && ns != c)
    throw std::invalid_argument("prelu: slope size " + std::to_string(ns) +
                                " vs channels " + std::to_string(c));
  const auto& av = slope.value();
  Tensor<T> out(xv.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T a = av[ns == 1 ? 0 : ch];
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = off; i < off + inner; ++i)
        out[i] = xv[i] >= T(0) ? xv[i] : a * xv[i];
    }
  return x.tape().record(std::move(out), {x, slope}, [=](const Tensor<T>& g) {
    const auto& xv = x.value();
    const auto& av = slope.value();
    Tensor<T>* gx = x.requires_grad() ? &x.tape().grad_ref(x) : nullptr;
    Tensor<T>* ga = slope.requires_grad() ? &slope.tape().grad_ref(slope) : nullptr;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t ai = ns == 1 ? 0 : ch;
        const std::size_t off = (b * c + ch) * inner;
        T acc = 0;
        for (std::size_t i = off; i < off + inner; ++i) {
          const bool pos = xv[i] >= T(0);
          if (gx) (*gx)[i] += pos ? g[i] : av[ai] * g[i];
          if (!pos) acc += g[i] * xv[i];
        }
        if (ga) (*ga)[ai] += acc;
      }
  });
}

// sqrt(a^2 + b^2 + eps): magnitude of a real/imaginary pair, smooth at 0.
template <class T>
Var<T> magnitude(const Var<T>& re, const Var<T>& im, T eps) {
  detail::same_shape(re, im, "magnitude");
  const auto& rv = re.value();
  const auto& iv = im.value();
  Tensor<T> out(rv.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::sqrt(rv[i] * rv[i] + iv[i] * iv[i] + eps);
  auto y = out;
  return re.tape().record(std::move(out), {re, im},
                          [re, im, y = std::move(y)](const Tensor<T>& g) {
                            const auto& rv = re.value();
                            const auto& iv = im.value();
                            if (re.requires_grad()) {
                              auto& gr = re.tape().grad_ref(re);
                              for (std::size_t i = 0; i < g.size(); ++i)
                                gr[i] += g[i] * rv[i] / y[i];
                            }
                            if (im.requires_grad()) {
                              auto& gi = im.tape().grad_ref(im);
                              for (std::size_t i = 0; i < g.size(); ++i)
                                gi[i] += g[i] * iv[i] / y[i];
                            }
                          });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  double s = 0;
  for (T v : a.value().data()) s += static_cast<double>(v);
  return a.tape().record(Tensor<T>({1}, std::vector<T>{static_cast<T>(s)}), {a},
                         [a](const Tensor<T>& g) {
                           auto& ga = a.tape().grad_ref(a);
                           for (auto& v : ga.data()) v += g[0];
                         });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

// Mean squared difference. Either side may be a constant.
template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  return mean(square(sub(a, b)));
}

// Same buffer, new shape.
template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](const Tensor<T>& g) {
    auto& ga = a.tape().grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

namespace detail {

// Splits a shape around `axis` into (outer, axis length, inner).
inline void split_axis(const Shape& s, std::size_t axis, std::size_t& outer,
                       std::size_t& len, std::size_t& inner) {
  if (axis >= s.size())
    throw std::invalid_argument("axis " + std::to_string(axis) +
                                " out of range for shape " + to_string(s));
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  len = s[axis];
}

}  // namespace detail

template <class T>
Var<T> concat(const std::vector<Var<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = xs[0].shape();
  std::size_t total = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != shape.size() || axis >= s.size())
      throw std::invalid_argument("concat: rank mismatch or bad axis");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != shape[d])
        throw std::invalid_argument("concat: shape " + to_string(s) +
                                    " incompatible with " + to_string(shape) +
                                    " on axis " + std::to_string(axis));
    total += s[axis];
  }
  shape[axis] = total;
  std::size_t outer, len, inner;
  detail::split_axis(shape, axis, outer, len, inner);
  Tensor<T> out(shape);
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const auto& xv = x.value();
    const std::size_t xl = xv.dim(axis);
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(xv.ptr() + o * xl * inner, xl * inner,
                  out.ptr() + (o * len + offset) * inner);
    offset += xl;
  }
  return xs[0].tape().record_span(
      std::move(out), std::span(xs.data(), xs.size()),
      [xs, axis, outer, len, inner](const Tensor<T>& g) {
        std::size_t offset = 0;
        for (const auto& x : xs) {
          const std::size_t xl = x.dim(axis);
          if (x.requires_grad()) {
            auto& gx = x.tape().grad_ref(x);
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = g.ptr() + (o * len + offset) * inner;
              T* dst = gx.ptr() + o * xl * inner;
              for (std::size_t i = 0; i < xl * inner; ++i) dst[i] += src[i];
            }
          }
          offset += xl;
        }
      });
}

// Elements [begin, end) along `axis`.
template <class T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  Shape shape = x.shape();
  std::size_t outer, len, inner;
  detail::split_axis(shape, axis, outer, len, inner);
  if (begin > end || end > len)
    throw std::invalid_argument("slice: range out of bounds");
  const std::size_t w = end - begin;
  shape[axis] = w;
  Tensor<T> out(shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.ptr() + (o * len + begin) * inner, w * inner,
                out.ptr() + o * w * inner);
  return x.tape().record(std::move(out), {x}, [=](const Tensor<T>& g) {
    auto& gx = x.tape().grad_ref(x);
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = g.ptr() + o * w * inner;
      T* dst = gx.ptr() + (o * len + begin) * inner;
      for (std::size_t i = 0; i < w * inner; ++i) dst[i] += src[i];
    }
  });
}

// Swaps axes 1 and 2 of a rank-3 or rank-4 tensor ([N,A,B,...] -> [N,B,A,...]).
template <class T>
Var<T> swap12(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.size() < 3) throw std::invalid_argument("swap12: rank must be >= 3");
  const std::size_t n = s[0], a = s[1], b = s[2];
  const std::size_t inner = x.value().size() / (n * a * b);
  Shape os = s;
  std::swap(os[1], os[2]);
  Tensor<T> out(os);
  const auto& xv = x.value();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j)
        std::copy_n(xv.ptr() + ((k * a + i) * b + j) * inner, inner,
                    out.ptr() + ((k * b + j) * a + i) * inner);
  return x.tape().record(std::move(out), {x}, [=](const Tensor<T>& g) {
    auto& gx = x.tape().grad_ref(x);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < a; ++i)
        for (std::size_t j = 0; j < b; ++j) {
          const T* src = g.ptr() + ((k * b + j) * a + i) * inner;
          T* dst = gx.ptr() + ((k * a + i) * b + j) * inner;
          for (std::size_t e = 0; e < inner; ++e) dst[e] += src[e];
        }
  });
}

}  // namespace taylorse::ad
