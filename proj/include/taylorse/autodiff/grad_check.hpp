// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <functional>
#include <random>

#include "taylorse/autodiff/ops.hpp"

namespace taylorse::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input i[j]: analytic a vs numeric n"
  bool passed() const { return max_rel_error <= tolerance; }
};

template <class T>
using LossFn = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

// Compares tape gradients of a scalar loss with central differences. The
// error of each element is |a - n| / max(1, |a|, |n|).
template <class T>
GradCheckReport grad_check(const LossFn<T>& loss, const std::vector<Tensor<T>>& inputs,
                           double tolerance, T h) {
  GradCheckReport rep;
  rep.tolerance = tolerance;

  std::vector<Tensor<T>> analytic;
  {
    Tape<T> tape;
    tape.set_check_finite(true);
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x));
    tape.backward(loss(tape, vars));
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  auto eval = [&](const std::vector<Tensor<T>>& xs) {
    Tape<T> tape(false);
    std::vector<Var<T>> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return static_cast<double>(loss(tape, vars).value()[0]);
  };

  std::vector<Tensor<T>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t j = 0; j < inputs[k].size(); ++j) {
      const T orig = probe[k][j];
      probe[k][j] = orig + h;
      const double fp = eval(probe);
      probe[k][j] = orig - h;
      const double fm = eval(probe);
      probe[k][j] = orig;
      const double num = (fp - fm) / (2.0 * static_cast<double>(h));
      const double ana = static_cast<double>(analytic[k][j]);
      const double err =
          std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
      ++rep.checked;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst = "input " + std::to_string(k) + "[" + std::to_string(j) +
                    "]: analytic " + std::to_string(ana) + " vs numeric " +
                    std::to_string(num);
      }
    }
  }
  return rep;
}

template <class T>
using OpFn = std::function<Var<T>(const std::vector<Var<T>>&)>;

// Checks an arbitrary-shaped op by reducing its output against a fixed
// random projection. The op runs in T; the reduction is accumulated in
// double so it adds no roundoff of its own.
template <class T>
GradCheckReport grad_check_op(const OpFn<T>& op, const std::vector<Tensor<T>>& inputs,
                              double tolerance, T h, std::uint64_t seed) {
  GradCheckReport rep;
  rep.tolerance = tolerance;

  Tensor<T> proj;
  std::vector<Tensor<T>> analytic;
  {
    Tape<T> tape;
    tape.set_check_finite(true);
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x));
    Var<T> y = op(vars);
    proj = Tensor<T>(y.shape());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : proj.data()) v = static_cast<T>(u(rng));
    tape.backward(sum(mul(y, tape.constant(proj))));
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  auto eval = [&](const std::vector<Tensor<T>>& xs) {
    Tape<T> tape(false);
    std::vector<Var<T>> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    const auto& y = op(vars).value();
    double f = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      f += static_cast<double>(y[i]) * static_cast<double>(proj[i]);
    return f;
  };

  std::vector<Tensor<T>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t j = 0; j < inputs[k].size(); ++j) {
      const T orig = probe[k][j];
      probe[k][j] = orig + h;
      const double fp = eval(probe);
      probe[k][j] = orig - h;
      const double fm = eval(probe);
      probe[k][j] = orig;
      // Use the realized step: orig +/- h is itself rounded in T.
      const double step = static_cast<double>(static_cast<T>(orig + h)) -
                          static_cast<double>(static_cast<T>(orig - h));
      const double num = (fp - fm) / step;
      const double ana = static_cast<double>(analytic[k][j]);
      const double err =
          std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
      ++rep.checked;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst = "input " + std::to_string(k) + "[" + std::to_string(j) +
                    "]: analytic " + std::to_string(ana) + " vs numeric " +
                    std::to_string(num);
      }
    }
  }
  return rep;
}

}  // namespace taylorse::ad
