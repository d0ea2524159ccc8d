// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Finite-difference checks for every primitive on randomized small shapes.

#include "taylorse/autodiff/conv.hpp"
#include "taylorse/autodiff/grad_check.hpp"
#include "taylorse/autodiff/norm.hpp"

namespace taylorse::ad {

template <class T>
struct GradCase {
  std::string name;
  std::vector<Tensor<T>> inputs;
  OpFn<T> op;
};

template <class T>
struct GradTolerance;
template <>
struct GradTolerance<float> {
  static constexpr float step = 1e-3f;
  static constexpr double tol = 1e-3;
};
template <>
struct GradTolerance<double> {
  static constexpr double step = 1e-5;
  static constexpr double tol = 1e-6;
};

namespace detail {

template <class T>
Tensor<T> uniform(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

// |v| in [0.05, 1]: piecewise-linear kinks stay outside the probe step.
template <class T>
Tensor<T> off_zero(Shape s, std::mt19937_64& rng) {
  Tensor<T> t(std::move(s));
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::bernoulli_distribution neg(0.5);
  for (auto& v : t.data()) v = static_cast<T>(neg(rng) ? -u(rng) : u(rng));
  return t;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace detail

// One randomized instance of every primitive for the given seed.
template <class T>
std::vector<GradCase<T>> gradient_cases(std::uint64_t seed) {
  using detail::off_zero;
  using detail::pick;
  using detail::uniform;
  std::mt19937_64 rng(seed);
  std::vector<GradCase<T>> cases;
  const Shape s3{pick(rng, 1, 2), pick(rng, 2, 3), pick(rng, 2, 5)};

  cases.push_back({"add", {uniform<T>(s3, rng), uniform<T>(s3, rng)},
                   [](const auto& v) { return add(v[0], v[1]); }});
  cases.push_back({"sub", {uniform<T>(s3, rng), uniform<T>(s3, rng)},
                   [](const auto& v) { return sub(v[0], v[1]); }});
  cases.push_back({"mul", {uniform<T>(s3, rng), uniform<T>(s3, rng)},
                   [](const auto& v) { return mul(v[0], v[1]); }});
  const T k = static_cast<T>(std::uniform_real_distribution<double>(-2, 2)(rng));
  cases.push_back({"scale", {uniform<T>(s3, rng)}, [k](const auto& v) { return scale(v[0], k); }});
  cases.push_back({"square", {uniform<T>(s3, rng)}, [](const auto& v) { return square(v[0]); }});
  cases.push_back({"sigmoid", {uniform<T>(s3, rng, -3, 3)},
                   [](const auto& v) { return sigmoid(v[0]); }});
  cases.push_back({"glu", {uniform<T>(s3, rng), uniform<T>(s3, rng, -3, 3)},
                   [](const auto& v) { return glu(v[0], v[1]); }});
  cases.push_back({"prelu", {off_zero<T>(s3, rng), uniform<T>({s3[1]}, rng, 0.05, 0.5)},
                   [](const auto& v) { return prelu(v[0], v[1]); }});
  cases.push_back({"magnitude", {uniform<T>(s3, rng), uniform<T>(s3, rng)},
                   [](const auto& v) { return magnitude(v[0], v[1], T(1e-2)); }});
  cases.push_back({"sum", {uniform<T>(s3, rng)}, [](const auto& v) { return sum(v[0]); }});
  cases.push_back({"mean", {uniform<T>(s3, rng)}, [](const auto& v) { return mean(v[0]); }});
  {
    Shape s2 = s3;
    s2[1] = pick(rng, 1, 3);
    cases.push_back({"concat", {uniform<T>(s3, rng), uniform<T>(s2, rng)},
                     [](const auto& v) { return concat<T>({v[0], v[1]}, 1); }});
  }
  cases.push_back({"slice", {uniform<T>(s3, rng)},
                   [](const auto& v) { return slice(v[0], 2, 1, v[0].dim(2)); }});
  cases.push_back({"reshape", {uniform<T>(s3, rng)}, [](const auto& v) {
                     return reshape(v[0], {v[0].value().size()});
                   }});
  cases.push_back({"swap12", {uniform<T>(s3, rng)}, [](const auto& v) { return swap12(v[0]); }});

  {
    const Shape s4{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 3, 6)};
    cases.push_back({"instance_norm",
                     {uniform<T>(s4, rng, -1, 2), uniform<T>({s4[1]}, rng, 0.5, 1.5),
                      uniform<T>({s4[1]}, rng)},
                     [](const auto& v) { return instance_norm(v[0], v[1], v[2], T(1e-5)); }});
    const Shape c3{pick(rng, 1, 2), pick(rng, 3, 6), pick(rng, 2, 4)};
    cases.push_back({"channel_norm",
                     {uniform<T>(c3, rng, -1, 2), uniform<T>({c3[1]}, rng, 0.5, 1.5),
                      uniform<T>({c3[1]}, rng)},
                     [](const auto& v) { return channel_norm(v[0], v[1], v[2], T(1e-5)); }});
  }
  {
    // 1x2x4x5 input with a (2,3) kernel, as in the causal UNet blocks.
    const std::size_t co = pick(rng, 1, 3);
    cases.push_back({"conv2d",
                     {uniform<T>({1, 2, 4, 5}, rng), uniform<T>({co, 2, 2, 3}, rng),
                      uniform<T>({co}, rng)},
                     [](const auto& v) { return conv2d(v[0], v[1], v[2], Conv2dSpec{1, 1, 1, 1, 1}); }});
    const std::size_t f = pick(rng, 5, 8);
    cases.push_back({"conv2d_stride",
                     {uniform<T>({1, 2, 3, f}, rng), uniform<T>({co, 2, 1, 3}, rng),
                      uniform<T>({co}, rng)},
                     [f](const auto& v) {
                       return conv2d(v[0], v[1], v[2], Conv2dSpec{1, 2, 1, 0, f % 2 == 0 ? 1u : 0u});
                     }});
    const std::size_t fs = f / 2;
    cases.push_back({"conv_transpose2d",
                     {uniform<T>({1, 2, 3, fs}, rng), uniform<T>({2, co, 2, 3}, rng),
                      uniform<T>({co}, rng)},
                     [f](const auto& v) {
                       return conv_transpose2d(v[0], v[1], v[2],
                                               Conv2dSpec{1, 2, 1, 0, f % 2 == 0 ? 1u : 0u}, f);
                     }});
    const std::size_t d = pick(rng, 1, 3);
    cases.push_back({"conv1d_dilated",
                     {uniform<T>({1, 2, pick(rng, 6, 10)}, rng), uniform<T>({co, 2, 3}, rng),
                      uniform<T>({co}, rng)},
                     [d](const auto& v) { return conv1d_causal(v[0], v[1], v[2], d); }});
  }
  return cases;
}

template <class T>
GradCheckReport check_case(const GradCase<T>& c, std::uint64_t seed) {
  return grad_check_op<T>(c.op, c.inputs, GradTolerance<T>::tol, GradTolerance<T>::step,
                          seed ^ 0x9e3779b97f4a7c15ull);
}

}  // namespace taylorse::ad
