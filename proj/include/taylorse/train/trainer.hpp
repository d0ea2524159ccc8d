// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "taylorse/model/taylor.hpp"
#include "taylorse/train/config.hpp"
#include "taylorse/train/mixture.hpp"

namespace taylorse::train {

// Mixtures with their compressed noisy and clean spectra.
struct Dataset {
  std::vector<Mixture> mixtures;
  std::vector<dsp::ComplexSpectrogram> noisy;
  std::vector<dsp::ComplexSpectrogram> clean;

  std::size_t size() const noexcept { return mixtures.size(); }
};

inline Dataset build_dataset(std::vector<Mixture> mixtures, double beta,
                             const dsp::AnalysisConfig& acfg = {}) {
  Dataset d;
  for (auto& m : mixtures) {
    d.noisy.push_back(dsp::compress(dsp::stft(m.noisy, acfg), beta));
    d.clean.push_back(dsp::compress(dsp::stft(m.clean, acfg), beta));
  }
  d.mixtures = std::move(mixtures);
  return d;
}

inline Dataset build_dataset(const std::vector<MixtureRecipe>& recipes, double beta,
                             const dsp::AnalysisConfig& acfg = {}) {
  std::vector<Mixture> ms;
  for (const auto& r : recipes) ms.push_back(synthesize_mixture(r));
  return build_dataset(std::move(ms), beta, acfg);
}

template <class T>
ad::Tensor<T> stack(const std::vector<dsp::ComplexSpectrogram>& all,
                    const std::vector<std::size_t>& idx) {
  std::vector<dsp::ComplexSpectrogram> sel;
  for (auto i : idx) sel.push_back(all.at(i));
  return model::to_tensor<T>(sel);
}

// Forward, backward and one Adam update on a batch. Returns the loss before
// the update.
template <class T>
double train_step(model::TaylorModel<T>& m, OptimizerState<T>& opt, const ad::Tensor<T>& noisy,
                  const ad::Tensor<T>& clean, const LossConfig& lcfg) {
  m.params().zero_grad();
  ad::Tape<T> tape;
  auto out = m.forward(tape, noisy);
  auto loss = spectral_loss(out.estimate, clean, lcfg);
  const double v = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(v)) throw NumericError("training diverged: loss is " + std::to_string(v));
  tape.backward(loss);
  adam_step(m.params(), opt);
  return v;
}

template <class T>
double eval_loss(model::TaylorModel<T>& m, const ad::Tensor<T>& noisy, const ad::Tensor<T>& clean,
                 const LossConfig& lcfg) {
  ad::Tape<T> tape(false);
  return static_cast<double>(spectral_loss(m.forward(tape, noisy).estimate, clean, lcfg).value()[0]);
}

// Mean loss over a dataset in chunks of `batch`.
template <class T>
double dataset_loss(model::TaylorModel<T>& m, const Dataset& d, std::size_t batch,
                    const LossConfig& lcfg) {
  double acc = 0.0;
  for (std::size_t b = 0; b < d.size(); b += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(d.size(), b + batch); ++i) idx.push_back(i);
    acc += eval_loss(m, stack<T>(d.noisy, idx), stack<T>(d.clean, idx), lcfg) *
           static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(d.size());
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

inline void write_metrics_header(std::ostream& os) { os << "epoch,train_loss,val_loss,lr\n"; }

inline void write_metrics_row(std::ostream& os, const EpochLog& e) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss, e.lr);
  os << buf;
}

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

inline std::vector<MixtureRecipe> train_recipes(const TrainConfig& c) {
  std::vector<MixtureRecipe> r;
  for (std::size_t i = 0; i < c.mixtures - c.val_count(); ++i)
    r.push_back(make_recipe(mix_seed(c.seed, 0), i, c.snr_lo, c.snr_hi, c.length_s));
  return r;
}

inline std::vector<MixtureRecipe> val_recipes(const TrainConfig& c) {
  std::vector<MixtureRecipe> r;
  for (std::size_t i = 0; i < c.val_count(); ++i)
    r.push_back(make_recipe(mix_seed(c.seed, 1), i, c.snr_lo, c.snr_hi, c.length_s));
  return r;
}

// Trains a float model per `cfg`, writing `metrics.csv` and the best
// checkpoint `model.json` (+ `model.bin`) to out_dir.
inline TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream* progress = nullptr) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const Dataset tr = build_dataset(train_recipes(cfg), cfg.loss.beta);
  const Dataset va = build_dataset(val_recipes(cfg), cfg.loss.beta);
  model::TaylorModel<float> m(cfg.model, mix_seed(cfg.seed, 2));
  OptimizerState<float> opt{cfg.adam, 0, {}, {}};
  PlateauSchedule sched{cfg.patience, cfg.factor};

  TrainResult res;
  res.checkpoint = out_dir / "model.json";
  res.metrics = out_dir / "metrics.csv";
  std::ofstream csv(res.metrics);
  if (!csv) throw DataError("cannot write " + res.metrics.string());
  write_metrics_header(csv);

  std::vector<std::size_t> order(tr.size());
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + e));
    std::shuffle(order.begin(), order.end(), rng);
    double acc = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) break;
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(order.size(), b + cfg.batch)));
      double v;
      try {
        v = train_step(m, opt, stack<float>(tr.noisy, idx), stack<float>(tr.clean, idx), cfg.loss);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(e) + " step " + std::to_string(res.steps + 1) +
                           ": " + err.what());
      }
      acc += v * static_cast<double>(idx.size());
      seen += idx.size();
      ++res.steps;
    }
    if (seen == 0) break;
    EpochLog log{e, acc / static_cast<double>(seen), dataset_loss(m, va, cfg.batch, cfg.loss),
                 opt.cfg.lr};
    if (!std::isfinite(log.val_loss))
      throw NumericError("epoch " + std::to_string(e) + ": validation loss is not finite");
    if (log.val_loss < res.best_val) {
      res.best_val = log.val_loss;
      m.save(res.checkpoint);
    }
    sched.observe(log.val_loss, opt.cfg.lr);
    write_metrics_row(csv, log);
    csv.flush();
    res.log.push_back(log);
    if (progress) write_metrics_row(*progress, log);
  }
  return res;
}

}  // namespace taylorse::train
