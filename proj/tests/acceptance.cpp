// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance <taylorse-binary> <work-dir> [criterion...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>

#include "model_oracles.hpp"
#include "taylorse/classical/classical.hpp"
#include "taylorse/metrics/metrics.hpp"
#include "taylorse/pipeline.hpp"
#include "taylorse/selftest.hpp"
#include "taylorse/train/trainer.hpp"

using namespace taylorse;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

model::TaylorConfig desk(std::size_t q) {
  auto c = model::TaylorConfig::desk();
  c.q = q;
  return c;
}

// 1
Outcome stft_round_trip() {
  const auto t = Clock::now();
  std::mt19937_64 rng(2001);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    dsp::Waveform w;
    w.samples.resize(16000);
    for (auto& v : w.samples) v = u(rng);
    const auto back = dsp::istft(dsp::stft(w));
    if (back.size() != w.size()) return {false, "length changed"};
    worst = std::max(worst, rel_l2(back.samples, w.samples));
  }
  const double el = seconds_since(t);
  return {worst <= 1e-6 && el < 5.0, fmt("max rel L2 %.3g (<= 1e-6), %.2f s (< 5 s)", worst, el)};
}

// 2
Outcome gradients() {
  const auto f = selftest::gradient_suite<float>(20), d = selftest::gradient_suite<double>(20);
  return {f.passed && d.passed, "float32 " + f.detail + " (<= 1e-3); float64 " + d.detail + " (<= 1e-6)"};
}

// 3
Outcome causality() {
  std::mt19937_64 rng(2003);
  double worst = 0.0, moved = 0.0;
  for (std::size_t q : {0, 1, 3}) {
    model::TaylorModel<double> m(desk(q), 30 + q);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t l = 16, k = 161;
      const std::size_t t0 = std::uniform_int_distribution<std::size_t>(0, l - 2)(rng);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      ad::Tensor<double> x({1, 2, l, k});
      for (auto& v : x.data()) v = u(rng);
      auto y = x;
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t t = t0 + 1; t < l; ++t)
          for (std::size_t f = 0; f < k; ++f) y[(p * l + t) * k + f] = 3.0 * u(rng);
      const auto a = m.trace(x).estimate, b = m.trace(y).estimate;
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t t = 0; t < l; ++t)
          for (std::size_t f = 0; f < k; ++f) {
            const std::size_t i = (p * l + t) * k + f;
            const double d = std::abs(a[i] - b[i]);
            if (t <= t0) worst = std::max(worst, d);
            else moved = std::max(moved, d);
          }
    }
  }
  return {worst <= 1e-12 && moved > 0.0,
          fmt("30 cases, max change at frames <= t0: %.3g (<= 1e-12); future frames do change (%.3g)",
              worst, moved)};
}

// 4
Outcome composition() {
  bool ok = true;
  std::string why;
  for (std::size_t q : {0, 1, 2, 3}) {
    for (bool shared : {false, true}) {
      if (q == 0 && shared) continue;
      auto cfg = selftest::small_config(q, shared);
      model::TaylorModel<float> m(cfg, 40 + q);
      std::mt19937_64 rng(q);
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      ad::Tensor<float> x({2, 2, 9, cfg.bins});
      for (auto& v : x.data()) v = u(rng);
      const auto tr = m.trace(x);
      const auto ref = oracle::straight_line(m, x);
      bool same = ref.coarse == tr.coarse && ref.estimate == tr.estimate &&
                  ref.terms.size() == tr.terms.size();
      for (std::size_t i = 0; same && i < ref.terms.size(); ++i) same = ref.terms[i] == tr.terms[i];
      if (!same) {
        ok = false;
        why += fmt(" mismatch at Q=%zu shared=%d;", q, int(shared));
      }
    }
  }
  // recursion and weights by direct arithmetic
  ad::Tensor<double> t({1, 2, 1, 2}, {1.0, -2.0, 0.5, 4.0}), p({1, 2, 1, 2}, {0.25, 1.0, -1.0, 2.0});
  ad::Tape<double> tape(false);
  const auto r = model::recursion_step(tape.constant(t), tape.constant(p), 2).value();
  for (std::size_t i = 0; i < 4; ++i)
    if (r[i] != 2.0 * t[i] + p[i]) {
      ok = false;
      why += " recursion mismatch;";
    }
  const double w[] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  for (std::size_t q = 0; q <= 3; ++q)
    if (model::order_weight<double>(q) != w[q]) {
      ok = false;
      why += fmt(" weight %zu wrong;", q);
    }
  return {ok, ok ? "traces equal the straight-line reimplementation bit for bit (Q 0..3, shared); "
                   "T(q+1) = q T(q) + P(q) exact; weights 1, 1, 1/2, 1/6"
                 : why};
}

// 5
Outcome parameter_counts() {
  bool ok = true;
  std::string why;
  auto c = model::TaylorConfig::desk();
  std::vector<std::size_t> shared, separate;
  for (std::size_t q = 0; q <= 5; ++q) {
    c.q = q;
    c.shared_high_order = false;
    separate.push_back(model::TaylorModel<float>(c, 1).count_params());
    if (separate.back() != oracle::model_count(c)) {
      ok = false;
      why += fmt(" non-shared Q=%zu: %zu vs %zu;", q, separate.back(), oracle::model_count(c));
    }
    if (q == 0) continue;
    c.shared_high_order = true;
    shared.push_back(model::TaylorModel<float>(c, 1).count_params());
    if (shared.back() != oracle::model_count(c) || shared.back() != shared.front()) {
      ok = false;
      why += fmt(" shared Q=%zu: %zu;", q, shared.back());
    }
  }
  const std::size_t slope = oracle::deriv_count(c);
  for (std::size_t q = 2; q <= 5; ++q)
    if (separate[q] - separate[q - 1] != slope) {
      ok = false;
      why += fmt(" slope at Q=%zu;", q);
    }
  auto full = model::TaylorConfig{};
  const std::size_t full_n = model::TaylorModel<float>(full, 1).count_params();
  ok = ok && full_n == oracle::model_count(full);
  return {ok, fmt("desk shared %zu for Q 1..5; non-shared %zu + %zu Q (Q >= 1), Q=0 %zu; "
                  "full preset Q=3 %.2f M",
                  shared.front(), separate[1] - slope, slope, separate[0], full_n / 1e6) +
                  why};
}

// 6
Outcome decoupling_identity() {
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto m = train::synthesize_mixture(train::make_recipe(2006, i, -5.0, 5.0, 1.0));
    const auto x = dsp::stft(m.noisy), s = dsp::stft(m.clean);
    const auto coarse = classical::spectral_subtract(x, dsp::magnitude(dsp::stft(m.noise)));
    auto rec = classical::add(coarse, classical::oracle_residual(s, coarse));
    rec.source_length = m.clean.size();
    const auto w = dsp::istft(rec);
    worst = std::max(worst, rel_l2(w.samples, m.clean.samples));
  }
  return {worst <= 1e-6, fmt("20 mixtures, max rel L2 %.3g (<= 1e-6)", worst)};
}

constexpr double kLearningRate = 1e-3;

// 7
Outcome overfit() {
  const auto t = Clock::now();
  std::vector<train::MixtureRecipe> rs;
  for (std::size_t i = 0; i < 4; ++i) rs.push_back(train::make_recipe(2024, i, -5.0, 0.0, 1.0));
  const auto d = train::build_dataset(rs, 0.5);
  model::TaylorModel<float> m(desk(3), 7);
  train::OptimizerState<float> opt{{kLearningRate}, 0, {}, {}};
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const auto x = train::stack<float>(d.noisy, idx), s = train::stack<float>(d.clean, idx);
  const train::LossConfig lc;
  const double first = train::eval_loss(m, x, s, lc);
  for (int step = 0; step < 500; ++step) train::train_step(m, opt, x, s, lc);
  const double last = train::eval_loss(m, x, s, lc);
  double gain = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& mx = d.mixtures[i];
    gain += metrics::sisnr(enhance(m, mx.noisy), mx.clean) - metrics::sisnr(mx.noisy, mx.clean);
  }
  gain /= 4.0;
  const double drop = 1.0 - last / first, el = seconds_since(t);
  return {drop >= 0.9 && gain >= 5.0 && el < 600.0,
          fmt("loss %.4g -> %.4g after 500 steps, drop %.1f%% (>= 90%%); mean SISNR gain %.2f dB "
              "(>= 5 dB); %.0f s (< 600 s)",
              first, last, 100.0 * drop, gain, el)};
}

// 8 and 9 share the trained models.
struct Ablation {
  double sisnr_q0 = 0.0, sisnr_q3 = 0.0, sisnr_noisy = 0.0;
  std::size_t sparse_ok = 0;
  std::string sparse_detail;
  double seconds = 0.0;
};

train::TrainConfig ablation_config(std::size_t q) {
  train::TrainConfig c;
  c.model = desk(q);
  c.adam.lr = kLearningRate;
  c.mixtures = 44;
  c.val_fraction = 4.0 / 44.0;
  c.epochs = 40;
  c.batch = 4;
  c.seed = 2008;
  return c;
}

const Ablation& ablation(const fs::path& work) {
  static std::optional<Ablation> cache;
  if (cache) return *cache;
  const auto t = Clock::now();
  Ablation a;
  std::vector<train::Mixture> held;
  for (std::size_t i = 0; i < 10; ++i)
    held.push_back(train::synthesize_mixture(train::make_recipe(2009, i, -5.0, 0.0, 1.0)));
  for (const auto& h : held) a.sisnr_noisy += metrics::sisnr(h.noisy, h.clean) / 10.0;
  for (std::size_t q : {0, 3}) {
    const auto dir = work / ("ablation_q" + std::to_string(q));
    train::train(ablation_config(q), dir);
    auto m = model::TaylorModel<float>::load(dir / "model.json");
    double acc = 0.0;
    for (const auto& h : held) acc += metrics::sisnr(enhance(m, h.noisy), h.clean) / 10.0;
    (q == 0 ? a.sisnr_q0 : a.sisnr_q3) = acc;
    if (q != 3) continue;
    for (const auto& h : held) {
      const auto ex = order_export(m, h.noisy);
      const double coarse = metrics::energy_cell_fraction(ex.grids[0].second);
      bool all = true;
      std::string row = fmt(" [coarse %.3f", coarse);
      for (std::size_t k = 1; k <= 3; ++k) {
        const double f = metrics::energy_cell_fraction(ex.grids[k].second);
        all = all && f < coarse;
        row += fmt(" T%zu %.3f", k, f);
      }
      a.sparse_detail += row + "]";
      a.sparse_ok += all;
    }
  }
  a.seconds = seconds_since(t);
  cache = a;
  return *cache;
}

Outcome directional_ablation(const fs::path& work) {
  const auto& a = ablation(work);
  return {a.sisnr_q3 - a.sisnr_q0 >= 0.0,
          fmt("held-out mean SISNR: noisy %.2f dB, Q=0 %.2f dB, Q=3 %.2f dB, gap %+.2f dB (>= 0); "
              "%.0f s for both runs",
              a.sisnr_noisy, a.sisnr_q0, a.sisnr_q3, a.sisnr_q3 - a.sisnr_q0, a.seconds)};
}

Outcome sparsity(const fs::path& work) {
  const auto& a = ablation(work);
  return {a.sparse_ok >= 8,
          fmt("%zu/10 mixtures with every T(q) sparser than the coarse grid (>= 8);", a.sparse_ok) +
              a.sparse_detail};
}

// 10
Outcome determinism(const std::string& cli, const fs::path& work) {
  const auto cfg = work / "det.cfg";
  {
    std::ofstream os(cfg);
    os << "preset = desk\nq = 2\nmixtures = 6\nepochs = 2\nbatch = 2\nlength_s = 0.5\n";
  }
  std::vector<fs::path> dirs{work / "det_a", work / "det_b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    const std::string cmd = "\"" + cli + "\" train --config \"" + cfg.string() + "\" --out \"" +
                            d.string() + "\" --seed 17 > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "train command failed: " + cmd};
  }
  bool ok = true;
  std::string detail;
  for (const char* f : {"metrics.csv", "model.json", "model.bin"}) {
    const auto a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt("%s %s (%zu bytes); ", f, same ? "identical" : "DIFFERENT", a.size());
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <taylorse-binary> <work-dir> [criterion...]\n";
    return 1;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);
  std::set<int> only;
  for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"stft round trip", stft_round_trip},
      {"gradient suite", gradients},
      {"causality", causality},
      {"composition oracle", composition},
      {"parameter-count laws", parameter_counts},
      {"decoupling identity", decoupling_identity},
      {"overfit", overfit},
      {"directional ablation", [&] { return directional_ablation(work); }},
      {"high-order sparsity", [&] { return sparsity(work); }},
      {"determinism", [&] { return determinism(cli, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << "criterion " << n << " " << (o.passed ? "PASS" : "FAIL") << " "
              << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
