// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <limits>

#include "taylorse/autodiff/params.hpp"

namespace taylorse::train {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct OptimizerState {
  AdamConfig cfg;
  std::size_t step = 0;
  std::map<std::string, ad::Tensor<T>> m, v;
};

// One bias-corrected Adam update from the gradients held in `params`.
// Throws NumericError, naming the parameter, on a non-finite gradient; no
// parameter is modified in that case.
template <class T>
void adam_step(ad::ParamStore<T>& params, OptimizerState<T>& st) {
  for (const auto& [name, p] : params)
    if (!p.grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + name + "'");
  if (!(st.cfg.lr > 0.0)) throw UsageError("learning rate must be > 0");
  ++st.step;
  const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (auto& [name, p] : params) {
    auto& m = st.m.try_emplace(name, p.value.shape()).first->second;
    auto& v = st.v.try_emplace(name, p.value.shape()).first->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double mn = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vn = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mn);
      v[i] = static_cast<T>(vn);
      const double upd = st.cfg.lr * (mn / c1) / (std::sqrt(vn / c2) + st.cfg.eps);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - upd);
    }
  }
}

// Halves the learning rate once validation loss has failed to improve on
// its best for `patience` consecutive epochs.
struct PlateauSchedule {
  std::size_t patience = 2;
  double factor = 0.5;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  // Returns true if lr was reduced.
  bool observe(double val_loss, double& lr) {
    if (val_loss < best) {
      best = val_loss;
      bad_epochs = 0;
      return false;
    }
    if (++bad_epochs < patience) return false;
    bad_epochs = 0;
    lr *= factor;
    return true;
  }
};

}  // namespace taylorse::train
