// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Convolutions over [N,C,T,F] feature maps, lowered to GEMM via im2col.
// Time is always padded on the past side only, so frame t of the output
// never reads input frames after t.

#include <memory>

#include "taylorse/eigen.hpp"

#include "taylorse/autodiff/ops.hpp"

namespace taylorse::ad {

struct Conv2dSpec {
  std::size_t stride_t = 1;
  std::size_t stride_f = 1;
  std::size_t dilation_t = 1;
  std::size_t pad_f_left = 0;
  std::size_t pad_f_right = 0;
};

// Index map between an input grid [cin, t_in, f_in] and the patch matrix
// [cin*kt*kf, t_out*f_out].
struct ConvGeometry {
  std::size_t cin = 0, t_in = 0, f_in = 0;
  std::size_t kt = 1, kf = 1;
  std::size_t st = 1, sf = 1, dt = 1;
  std::size_t pad_t_front = 0, pad_t_back = 0;
  std::size_t pad_f_left = 0, pad_f_right = 0;
  std::size_t t_out = 0, f_out = 0;

  void finalize() {
    const std::size_t span_t = (kt - 1) * dt + 1;
    const std::size_t tp = t_in + pad_t_front + pad_t_back;
    const std::size_t fp = f_in + pad_f_left + pad_f_right;
    if (st == 0 || sf == 0 || dt == 0)
      throw std::invalid_argument("conv: stride and dilation must be >= 1");
    if (tp < span_t || fp < kf)
      throw std::invalid_argument("conv: kernel larger than padded input");
    t_out = (tp - span_t) / st + 1;
    f_out = (fp - kf) / sf + 1;
  }
  std::size_t rows() const { return cin * kt * kf; }
  // Patch matrix equals the input itself.
  bool pointwise() const {
    return kt == 1 && kf == 1 && st == 1 && sf == 1 && pad_t_front == 0 && pad_t_back == 0 &&
           pad_f_left == 0 && pad_f_right == 0;
  }
  std::size_t cols() const { return t_out * f_out; }
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Output columns [lo, hi) whose input bin fo*sf + j - pad_f_left is in range.
inline void valid_cols(const ConvGeometry& g, std::size_t j, std::size_t& lo, std::size_t& hi) {
  const long pad = static_cast<long>(g.pad_f_left), jj = static_cast<long>(j);
  const long sf = static_cast<long>(g.sf), fin = static_cast<long>(g.f_in);
  long a = pad - jj > 0 ? (pad - jj + sf - 1) / sf : 0;
  long b = (fin - 1 + pad - jj) >= 0 ? (fin - 1 + pad - jj) / sf + 1 : 0;
  b = std::min(b, static_cast<long>(g.f_out));
  a = std::min(a, b);
  lo = static_cast<std::size_t>(a);
  hi = static_cast<std::size_t>(b);
}

template <class T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::size_t ncol = g.cols();
  for (std::size_t j = 0; j < g.kf; ++j) {
    std::size_t lo, hi;
    valid_cols(g, j, lo, hi);
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t i = 0; i < g.kt; ++i) {
        T* row = cols + ((c * g.kt + i) * g.kf + j) * ncol;
        for (std::size_t to = 0; to < g.t_out; ++to) {
          T* dst = row + to * g.f_out;
          const long ti = static_cast<long>(to * g.st + i * g.dt) -
                          static_cast<long>(g.pad_t_front);
          if (ti < 0 || ti >= static_cast<long>(g.t_in)) {
            std::fill_n(dst, g.f_out, T(0));
            continue;
          }
          const T* src = x + (c * g.t_in + static_cast<std::size_t>(ti)) * g.f_in +
                         (lo * g.sf + j - g.pad_f_left);
          std::fill(dst, dst + lo, T(0));
          if (g.sf == 1) {
            std::copy(src, src + (hi - lo), dst + lo);
          } else {
            for (std::size_t fo = lo; fo < hi; ++fo) dst[fo] = src[(fo - lo) * g.sf];
          }
          std::fill(dst + hi, dst + g.f_out, T(0));
        }
      }
  }
}

// Adjoint of im2col: scatters patch values back, accumulating into x.
template <class T>
void col2im_add(const ConvGeometry& g, const T* cols, T* x) {
  const std::size_t ncol = g.cols();
  for (std::size_t j = 0; j < g.kf; ++j) {
    std::size_t lo, hi;
    valid_cols(g, j, lo, hi);
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t i = 0; i < g.kt; ++i) {
        const T* row = cols + ((c * g.kt + i) * g.kf + j) * ncol;
        for (std::size_t to = 0; to < g.t_out; ++to) {
          const long ti = static_cast<long>(to * g.st + i * g.dt) -
                          static_cast<long>(g.pad_t_front);
          if (ti < 0 || ti >= static_cast<long>(g.t_in)) continue;
          const T* src = row + to * g.f_out;
          T* dst = x + (c * g.t_in + static_cast<std::size_t>(ti)) * g.f_in +
                   (lo * g.sf + j - g.pad_f_left);
          for (std::size_t fo = lo; fo < hi; ++fo) dst[(fo - lo) * g.sf] += src[fo];
        }
      }
  }
}

template <class T>
void add_bias(T* y, const T* b, std::size_t cout, std::size_t plane) {
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t p = 0; p < plane; ++p) y[o * plane + p] += b[o];
}

template <class T>
void bias_grad(const T* gy, T* gb, std::size_t cout, std::size_t plane) {
  for (std::size_t o = 0; o < cout; ++o) {
    T s = 0;
    for (std::size_t p = 0; p < plane; ++p) s += gy[o * plane + p];
    gb[o] += s;
  }
}

}  // namespace detail

// Cross-correlation of x[N,Cin,T,F] with w[Cout,Cin,kt,kf]; optional
// bias[Cout] (pass a default-constructed Var for none). Time is zero-padded
// by (kt-1)*dilation_t frames in the past.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias,
              const Conv2dSpec& spec) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw std::invalid_argument("conv2d: expects x[N,C,T,F] and w[O,C,kt,kf]");
  if (xs[1] != ws[1])
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xs[1]) +
                                " vs weight " + to_string(ws));
  const bool has_bias = bias.valid();
  if (has_bias) require_shape(bias.shape(), {ws[0]}, "conv2d bias");

  ConvGeometry g;
  g.cin = xs[1];
  g.t_in = xs[2];
  g.f_in = xs[3];
  g.kt = ws[2];
  g.kf = ws[3];
  g.st = spec.stride_t;
  g.sf = spec.stride_f;
  g.dt = spec.dilation_t;
  g.pad_t_front = (g.kt - 1) * g.dt;
  g.pad_f_left = spec.pad_f_left;
  g.pad_f_right = spec.pad_f_right;
  g.finalize();

  const std::size_t n = xs[0], cout = ws[0];
  const std::size_t in_sz = g.cin * g.t_in * g.f_in;
  const std::size_t out_plane = g.cols();
  Tensor<T> out({n, cout, g.t_out, g.f_out});
  const std::size_t patch = g.rows() * g.cols();
  const bool pw = g.pointwise();
  // Patch matrices are kept for the weight gradient.
  auto cols = std::make_shared<std::vector<T>>(pw ? 0 : n * patch);
  detail::CMapMat<T> W(w.value().ptr(), cout, g.rows());
  for (std::size_t b = 0; b < n; ++b) {
    const T* pb = x.value().ptr() + b * in_sz;
    if (!pw) {
      detail::im2col(g, pb, cols->data() + b * patch);
      pb = cols->data() + b * patch;
    }
    detail::MapMat<T> Y(out.ptr() + b * cout * out_plane, cout, out_plane);
    Y.noalias() = W * detail::CMapMat<T>(pb, g.rows(), g.cols());
    if (has_bias)
      detail::add_bias(out.ptr() + b * cout * out_plane, bias.value().ptr(), cout,
                       out_plane);
  }

  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return x.tape().record_span(
      std::move(out), parents, [=](const Tensor<T>& gy) {
        std::vector<T> dcols;
        detail::CMapMat<T> W(w.value().ptr(), cout, g.rows());
        Tensor<T>* gx = x.requires_grad() ? &x.tape().grad_ref(x) : nullptr;
        Tensor<T>* gw = w.requires_grad() ? &w.tape().grad_ref(w) : nullptr;
        Tensor<T>* gb = has_bias && bias.requires_grad() ? &bias.tape().grad_ref(bias)
                                                         : nullptr;
        if (gx && !pw) dcols.resize(patch);
        for (std::size_t b = 0; b < n; ++b) {
          detail::CMapMat<T> GY(gy.ptr() + b * cout * out_plane, cout, out_plane);
          if (gw) {
            const T* pb = pw ? x.value().ptr() + b * in_sz : cols->data() + b * patch;
            detail::MapMat<T> GW(gw->ptr(), cout, g.rows());
            GW.noalias() += GY * detail::CMapMat<T>(pb, g.rows(), g.cols()).transpose();
          }
          if (gb) detail::bias_grad(gy.ptr() + b * cout * out_plane, gb->ptr(), cout,
                                    out_plane);
          if (gx && pw) {
            detail::MapMat<T> GX(gx->ptr() + b * in_sz, g.rows(), g.cols());
            GX.noalias() += W.transpose() * GY;
          } else if (gx) {
            detail::MapMat<T> DC(dcols.data(), g.rows(), g.cols());
            DC.noalias() = W.transpose() * GY;
            detail::col2im_add(g, dcols.data(), gx->ptr() + b * in_sz);
          }
        }
      });
}

// Transposed convolution of x[N,Cin,T,F] with w[Cin,Cout,kt,kf]: the adjoint
// of conv2d with the same geometry, producing out_f frequency bins. Time
// stride must be 1; the kt-1 trailing frames are dropped so frame t only
// receives contributions from input frames <= t.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias,
                        const Conv2dSpec& spec, std::size_t out_f) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw std::invalid_argument(
        "conv_transpose2d: expects x[N,C,T,F] and w[C,O,kt,kf]");
  if (xs[1] != ws[0])
    throw std::invalid_argument("conv_transpose2d: input channels " +
                                std::to_string(xs[1]) + " vs weight " + to_string(ws));
  if (spec.stride_t != 1)
    throw std::invalid_argument("conv_transpose2d: time stride must be 1");
  const bool has_bias = bias.valid();
  const std::size_t n = xs[0], cin = xs[1], cout = ws[1];
  if (has_bias) require_shape(bias.shape(), {cout}, "conv_transpose2d bias");

  // Geometry of the forward conv that maps the output grid back onto x.
  ConvGeometry g;
  g.cin = cout;
  g.t_in = xs[2];
  g.f_in = out_f;
  g.kt = ws[2];
  g.kf = ws[3];
  g.sf = spec.stride_f;
  g.dt = spec.dilation_t;
  g.pad_t_back = (g.kt - 1) * g.dt;
  g.pad_f_left = spec.pad_f_left;
  g.pad_f_right = spec.pad_f_right;
  g.finalize();
  if (g.t_out != xs[2] || g.f_out != xs[3])
    throw std::invalid_argument("conv_transpose2d: out_f " + std::to_string(out_f) +
                                " inconsistent with input " + to_string(xs));

  const std::size_t small = xs[2] * xs[3];
  const std::size_t big = g.t_in * g.f_in;
  Tensor<T> out({n, cout, g.t_in, out_f});
  std::vector<T> cols(g.rows() * g.cols());
  detail::CMapMat<T> W(w.value().ptr(), cin, g.rows());
  for (std::size_t b = 0; b < n; ++b) {
    detail::MapMat<T> C(cols.data(), g.rows(), g.cols());
    C.noalias() = W.transpose() * detail::CMapMat<T>(x.value().ptr() + b * cin * small,
                                                     cin, small);
    detail::col2im_add(g, cols.data(), out.ptr() + b * cout * big);
    if (has_bias) detail::add_bias(out.ptr() + b * cout * big, bias.value().ptr(), cout, big);
  }

  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return x.tape().record_span(
      std::move(out), parents, [=](const Tensor<T>& gy) {
        std::vector<T> cols(g.rows() * g.cols());
        detail::CMapMat<T> W(w.value().ptr(), cin, g.rows());
        Tensor<T>* gx = x.requires_grad() ? &x.tape().grad_ref(x) : nullptr;
        Tensor<T>* gw = w.requires_grad() ? &w.tape().grad_ref(w) : nullptr;
        Tensor<T>* gb = has_bias && bias.requires_grad() ? &bias.tape().grad_ref(bias)
                                                         : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          detail::im2col(g, gy.ptr() + b * cout * big, cols.data());
          detail::CMapMat<T> C(cols.data(), g.rows(), g.cols());
          if (gx) {
            detail::MapMat<T> GX(gx->ptr() + b * cin * small, cin, small);
            GX.noalias() += W * C;
          }
          if (gw) {
            detail::MapMat<T> GW(gw->ptr(), cin, g.rows());
            GW.noalias() +=
                detail::CMapMat<T>(x.value().ptr() + b * cin * small, cin, small) *
                C.transpose();
          }
          if (gb) detail::bias_grad(gy.ptr() + b * cout * big, gb->ptr(), cout, big);
        }
      });
}

// Dilated causal 1-D convolution of x[N,Cin,T] with w[Cout,Cin,k]: the
// input is zero-padded by (k-1)*dilation past frames.
template <class T>
Var<T> conv1d_causal(const Var<T>& x, const Var<T>& w, const Var<T>& bias,
                     std::size_t dilation = 1) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 3)
    throw std::invalid_argument("conv1d: expects x[N,C,T] and w[O,C,k]");
  if (dilation == 0) throw std::invalid_argument("conv1d: dilation must be >= 1");
  Conv2dSpec spec;
  spec.dilation_t = dilation;
  auto y = conv2d(reshape(x, {xs[0], xs[1], xs[2], 1}),
                  reshape(w, {ws[0], ws[1], ws[2], 1}), bias, spec);
  return reshape(y, {xs[0], ws[0], xs[2]});
}

}  // namespace taylorse::ad
