// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "taylorse/autodiff/tape.hpp"

namespace taylorse::ad {

template <class T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
};

// Named trainable tensors, iterated in lexicographic name order. Names are
// hierarchical ("zero/enc0/glu/w").
template <class T>
class ParamStore {
 public:
  using Map = std::map<std::string, Param<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> init) {
    if (params_.contains(name))
      throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    Tensor<T> grad(init.shape());
    auto [it, _] = params_.emplace(name, Param<T>{std::move(init), std::move(grad)});
    return it->second.value;
  }

  bool contains(const std::string& name) const { return params_.contains(name); }

  Param<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
  }
  const Param<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
  }

  const Tensor<T>& value(const std::string& name) const { return at(name).value; }
  Tensor<T>& value(const std::string& name) { return at(name).value; }
  const Tensor<T>& grad(const std::string& name) const { return at(name).grad; }

  // Parameter as a differentiable leaf of `tape`; its gradient is
  // accumulated into this store by Tape::backward.
  Var<T> use(Tape<T>& tape, const std::string& name) {
    Param<T>& p = at(name);
    return tape.named_leaf(name, p.value, &p.grad);
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.fill(T(0));
  }

  // Total number of trainable scalars.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  // Scalars held by parameters whose name starts with `prefix`.
  std::size_t count(const std::string& prefix) const {
    std::size_t n = 0;
    for (auto it = params_.lower_bound(prefix);
         it != params_.end() && it->first.starts_with(prefix); ++it)
      n += it->second.value.size();
    return n;
  }

  std::size_t size() const noexcept { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>());
    return out;
  }

 private:
  Map params_;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace taylorse::ad
