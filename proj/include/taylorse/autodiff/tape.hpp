// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>

#include "taylorse/autodiff/tensor.hpp"
#include "taylorse/error.hpp"

namespace taylorse::ad {

template <class T>
class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
// lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const { return tape_->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t i) const { return value().dim(i); }
  std::size_t id() const noexcept { return id_; }
  Tape<T>& tape() const { return *tape_; }
  bool requires_grad() const { return tape_->requires_grad(*this); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records a computation in creation (hence topological) order and replays it
// backwards. One tape per forward pass; not shared across threads.
template <class T>
class Tape {
 public:
  // Receives the gradient flowing into the node's output.
  using Backward = std::function<void(const Tensor<T>& grad_out)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {
#ifndef NDEBUG
    check_finite_ = true;
#endif
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  void set_check_finite(bool on) noexcept { check_finite_ = on; }

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false); }

  // A differentiable input. If `sink` is given, backward() adds the node's
  // gradient into it.
  Var<T> leaf(Tensor<T> value, Tensor<T>* sink = nullptr) {
    Var<T> v = push(std::move(value), grad_enabled_);
    nodes_[v.id()].sink = grad_enabled_ ? sink : nullptr;
    return v;
  }

  // Named leaf cached per tape, so a parameter used several times maps to
  // one node.
  Var<T> named_leaf(const std::string& name, const Tensor<T>& value,
                    Tensor<T>* sink) {
    auto it = named_.find(name);
    if (it != named_.end()) return it->second;
    Var<T> v = leaf(value, sink);
    named_.emplace(name, v);
    return v;
  }

  // Records an op result. The backward rule is kept only if some parent
  // requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                Backward backward) {
    return record_span(std::move(value), std::span(parents.begin(), parents.size()),
                       std::move(backward));
  }

  Var<T> record_span(Tensor<T> value, std::span<const Var<T>> parents,
                     Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || requires_grad(p);
    if (check_finite_ && !value.all_finite())
      throw NumericError("non-finite value produced at tape node " +
                         std::to_string(nodes_.size()));
    Var<T> v = push(std::move(value), needs);
    if (needs) nodes_[v.id()].backward = std::move(backward);
    return v;
  }

  const Tensor<T>& value(const Var<T>& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var<T>& v) const {
    return nodes_.at(v.id()).requires_grad;
  }

  // Gradient accumulator of a node, zero-initialized on first access.
  Tensor<T>& grad_ref(const Var<T>& v) {
    Node& n = nodes_.at(v.id());
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  // Gradient after backward(); zeros if the node received none.
  Tensor<T> grad(const Var<T>& v) const {
    const Node& n = nodes_.at(v.id());
    return n.grad.empty() ? Tensor<T>(n.value.shape()) : n.grad;
  }

  void backward(const Var<T>& loss) {
    if (loss.value().size() != 1)
      throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                  to_string(loss.shape()));
    if (!requires_grad(loss)) return;
    grad_ref(loss)[0] += T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(n.grad);
      if (n.sink) *n.sink += n.grad;
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Tensor<T>* sink = nullptr;
    Backward backward;
  };

  Var<T> push(Tensor<T> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr, {}});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  std::map<std::string, Var<T>> named_;
  bool grad_enabled_ = true;
  bool check_finite_ = false;
};

}  // namespace taylorse::ad
