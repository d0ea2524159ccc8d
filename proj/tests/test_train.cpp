// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "taylorse/train/trainer.hpp"
#include "test_util.hpp"

using namespace taylorse;
using namespace taylorse::train;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("taylorse_train_" + name);
  fs::remove_all(d);
  return d;
}

TrainConfig small_run(std::uint64_t seed) {
  TrainConfig c;
  c.model.channels = 4;
  c.model.unet_depths = {1, 0};
  c.model.stcm_per_group = 2;
  c.model.stcm_dilations = {1, 2};
  c.model.stcm_squeeze = 4;
  c.model.deriv_features = 8;
  c.model.q = 2;
  c.mixtures = 4;
  c.val_fraction = 0.25;
  c.batch = 2;
  c.epochs = 3;
  c.length_s = 0.2;
  c.seed = seed;
  return c;
}

dsp::ComplexSpectrogram spec2x2(std::initializer_list<std::complex<double>> z) {
  dsp::ComplexSpectrogram s(2, 2);
  std::size_t i = 0;
  for (auto v : z) s.set(i++, v);
  return s;
}

}  // namespace

TEST(Mixture, MeasuredSnrMatchesRequest) {
  double worst = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    auto r = make_recipe(5, i, -5.0, 0.0, 0.1);
    const auto m = synthesize_mixture(r);
    worst = std::max(worst, std::abs(measured_snr_db(m) - r.snr_db));
    ASSERT_GE(r.snr_db, -5.0);
    ASSERT_LE(r.snr_db, 0.0);
  }
  EXPECT_LE(worst, 0.01);
}

TEST(Mixture, NoisyIsCleanPlusNoise) {
  const auto m = synthesize_mixture(make_recipe(6, 0, -5.0, 0.0, 0.5));
  ASSERT_EQ(m.noisy.size(), 8000u);
  for (std::size_t i = 0; i < m.noisy.size(); ++i)
    EXPECT_DOUBLE_EQ(m.noisy.samples[i], m.clean.samples[i] + m.noise.samples[i]);
}

TEST(Mixture, ZeroDbMatchesCleanRms) {
  dsp::Waveform clean, noise;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 16000; ++i) {
    clean.samples.push_back(0.1 * std::sqrt(2.0) * std::sin(0.05 * i));
    noise.samples.push_back(0.3 * n(rng));
  }
  const auto m = mix(clean, noise, 0.0);
  EXPECT_NEAR(std::sqrt(dsp::mean_power(m.noise.samples)), std::sqrt(dsp::mean_power(clean.samples)),
              1e-12);
  EXPECT_NEAR(std::sqrt(dsp::mean_power(m.noise.samples)), 0.1, 1e-3);
}

TEST(Mixture, InfiniteSnrLeavesCleanUntouched) {
  auto r = make_recipe(8, 3, 0.0, 0.0, 0.25);
  r.snr_db = kNoNoise;
  const auto m = synthesize_mixture(r);
  EXPECT_EQ(m.noisy.samples, m.clean.samples);
}

TEST(Mixture, SilentSourcesRejected) {
  dsp::Waveform z, n = testutil::random_wave(100, 1);
  z.samples.assign(100, 0.0);
  EXPECT_THROW(mix(z, n, 0.0), DataError);
  EXPECT_THROW(mix(n, z, 0.0), DataError);
}

TEST(Mixture, RecipesAreOrderIndependent) {
  const auto a = make_recipe(9, 17, -5.0, 0.0, 1.0);
  const auto b = make_recipe(9, 17, -5.0, 0.0, 1.0);
  EXPECT_EQ(a.clean_seed, b.clean_seed);
  EXPECT_EQ(a.snr_db, b.snr_db);
  EXPECT_EQ(synthesize_mixture(a).noisy.samples, synthesize_mixture(b).noisy.samples);
  EXPECT_NE(make_recipe(9, 18, -5.0, 0.0, 1.0).clean_seed, a.clean_seed);
}

TEST(Loss, ZeroAtEqualityAndSymmetric) {
  auto rng = std::mt19937_64(10);
  std::normal_distribution<double> n;
  dsp::ComplexSpectrogram a(5, 7), b(5, 7);
  for (std::size_t i = 0; i < a.cells(); ++i) {
    a.set(i, {n(rng), n(rng)});
    b.set(i, {n(rng), n(rng)});
  }
  EXPECT_EQ(loss(a, a), 0.0);
  EXPECT_GT(loss(a, b), 0.0);
  EXPECT_EQ(loss(a, b), loss(b, a));
}

TEST(Loss, HandComputedTwoByTwo) {
  // compressed with beta 0.5: 4 -> 2, -9 -> -3, 16i -> 4i, (3+4i) -> sqrt(5) e^{i theta}
  const auto est = spec2x2({4.0, -9.0, {0.0, 16.0}, {3.0, 4.0}});
  const auto ref = spec2x2({1.0, -9.0, 0.0, {-3.0, -4.0}});
  const double r5 = std::sqrt(5.0);
  const double ri = ((2.0 - 1.0) * (2.0 - 1.0) + 0.0 + 16.0 + 4.0 * (0.6 * r5) * (0.6 * r5) +
                     4.0 * (0.8 * r5) * (0.8 * r5)) / 8.0;
  const double e = 1e-8;
  const auto d = [e](double x, double y) {
    const double u = std::sqrt(x * x + e) - std::sqrt(y * y + e);
    return u * u;
  };
  const double mg = (d(2.0, 1.0) + d(3.0, 3.0) + d(4.0, 0.0) + d(r5, r5)) / 4.0;
  EXPECT_NEAR(loss(est, ref), 0.5 * ri + 0.5 * mg, 1e-12);
  LossConfig only_ri{0.5, 1.0, 0.0};
  EXPECT_NEAR(loss(est, ref, only_ri), ri, 1e-12);
}

TEST(Loss, TapeLossMatchesDoubleLoss) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  dsp::ComplexSpectrogram a(4, 6), b(4, 6);
  for (std::size_t i = 0; i < a.cells(); ++i) {
    a.set(i, {n(rng), n(rng)});
    b.set(i, {n(rng), n(rng)});
  }
  const LossConfig cfg;
  ad::Tape<double> tape;
  auto est = tape.leaf(model::to_tensor<double>(dsp::compress(a, cfg.beta)));
  auto v = spectral_loss(est, model::to_tensor<double>(dsp::compress(b, cfg.beta)), cfg);
  EXPECT_NEAR(v.value()[0], loss(a, b, cfg), 1e-12);
}

TEST(Loss, ConfigValidation) {
  EXPECT_THROW((LossConfig{0.5, 0.6, 0.6}.validate()), UsageError);
  EXPECT_THROW((LossConfig{0.0, 0.5, 0.5}.validate()), UsageError);
  EXPECT_THROW((LossConfig{1.5, 0.5, 0.5}.validate()), UsageError);
  EXPECT_NO_THROW((LossConfig{1.0, 0.25, 0.75}.validate()));
}

namespace {

ad::ParamStore<double> scalar_store(std::vector<double> vals) {
  ad::ParamStore<double> ps;
  ps.add("w", ad::Tensor<double>({vals.size()}, vals));
  return ps;
}

}  // namespace

TEST(Adam, FirstStepIsLrTimesSign) {
  auto ps = scalar_store({1.0, -2.0, 0.5, 3.0});
  const std::vector<double> g{0.3, -1e-3, 25.0, -7.0};
  for (std::size_t i = 0; i < g.size(); ++i) ps.at("w").grad[i] = g[i];
  OptimizerState<double> st{{1e-3}, 0, {}, {}};
  adam_step(ps, st);
  const std::vector<double> before{1.0, -2.0, 0.5, 3.0};
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(before[i] - ps.value("w")[i], 1e-3 * (g[i] > 0 ? 1.0 : -1.0), 1e-6) << i;
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto ps = scalar_store({1.0, -2.0});
  OptimizerState<double> st;
  for (int i = 0; i < 3; ++i) adam_step(ps, st);
  EXPECT_EQ(ps.value("w")[0], 1.0);
  EXPECT_EQ(ps.value("w")[1], -2.0);
}

TEST(Adam, QuadraticTrajectoryMatchesScalarOracle) {
  // f(w) = 0.5 a (w - c)^2 per coordinate
  const std::vector<double> a{1.0, 3.0, 0.2}, c{0.5, -1.0, 2.0}, w0{2.0, 1.0, -1.0};
  auto ps = scalar_store(w0);
  OptimizerState<double> st{{0.05}, 0, {}, {}};
  std::vector<double> w = w0, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 10; ++t) {
    for (std::size_t i = 0; i < 3; ++i) ps.at("w").grad[i] = a[i] * (ps.value("w")[i] - c[i]);
    adam_step(ps, st);
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = a[i] * (w[i] - c[i]);
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.9, t)), vh = v[i] / (1.0 - std::pow(0.999, t));
      w[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(ps.value("w")[i], w[i], 1e-7);
}

TEST(Adam, NonFiniteGradientThrowsAndNamesParameter) {
  auto ps = scalar_store({1.0, 2.0});
  ps.at("w").grad[1] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState<double> st;
  try {
    adam_step(ps, st);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_EQ(ps.value("w")[0], 1.0);
  EXPECT_EQ(st.step, 0u);
}

TEST(Schedule, HalvesAfterTwoNonImprovingEpochs) {
  PlateauSchedule s;
  double lr = 1e-3;
  EXPECT_FALSE(s.observe(1.0, lr));
  EXPECT_FALSE(s.observe(1.1, lr));
  EXPECT_TRUE(s.observe(1.2, lr));
  EXPECT_EQ(lr, 5e-4);
}

TEST(Schedule, DecreasingLossKeepsLr) {
  PlateauSchedule s;
  double lr = 1e-3;
  for (double v = 1.0; v > 0.1; v *= 0.9) EXPECT_FALSE(s.observe(v, lr));
  EXPECT_EQ(lr, 1e-3);
}

TEST(Schedule, LrNeverIncreases) {
  PlateauSchedule s;
  double lr = 1.0, prev = lr;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    s.observe(u(rng), lr);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(TrainConfigFile, ParsesKeysAndPreset) {
  std::istringstream in(
      "# comment\npreset = desk\nq = 1\nshared = true\nlr = 1e-3\nepochs = 2\n\nseed=42\n"
      "snr_lo = -3\nsnr_hi = 2\n");
  const auto c = parse_train_config(in);
  EXPECT_EQ(c.model.q, 1u);
  EXPECT_TRUE(c.model.shared_high_order);
  EXPECT_EQ(c.model.channels, model::TaylorConfig::desk().channels);
  EXPECT_EQ(c.adam.lr, 1e-3);
  EXPECT_EQ(c.epochs, 2u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.snr_lo, -3.0);
  EXPECT_EQ(c.snr_hi, 2.0);
  std::istringstream full("preset = full\n");
  EXPECT_EQ(parse_train_config(full).model.channels, model::TaylorConfig{}.channels);
}

TEST(TrainConfigFile, UnknownKeyIsNamed) {
  std::istringstream in("q = 2\nlearning_rate = 1\n");
  try {
    parse_train_config(in, "x.cfg");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(TrainConfigFile, RejectsMalformedInput) {
  for (const char* text : {"q 2\n", "q = two\n", "q = 1\nq = 2\n", "epochs = -1\n",
                           "shared = maybe\n", "w_ri = 0.9\n", "preset = huge\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_train_config(in), UsageError) << text;
  }
}

TEST(TrainConfigFile, MissingFileMessageHasPath) {
  const fs::path p = "/nonexistent/dir/train.cfg";
  try {
    load_train_config(p);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
}

TEST(TrainConfigFile, ValidationSplitIsDisjoint) {
  TrainConfig c;
  c.mixtures = 20;
  EXPECT_EQ(c.val_count(), 2u);
  const auto tr = train_recipes(c), va = val_recipes(c);
  EXPECT_EQ(tr.size(), 18u);
  for (const auto& a : tr)
    for (const auto& b : va) EXPECT_NE(a.clean_seed, b.clean_seed);
}

TEST(Trainer, WritesLogAndBestCheckpoint) {
  const auto dir = scratch("log");
  const auto cfg = small_run(3);
  const auto res = train::train(cfg, dir);
  ASSERT_EQ(res.log.size(), cfg.epochs);
  EXPECT_EQ(res.steps, cfg.epochs * 2);
  std::istringstream csv(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,train_loss,val_loss,lr");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, cfg.epochs);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : res.log) best = std::min(best, e.val_loss);
  EXPECT_EQ(res.best_val, best);
  auto m = model::TaylorModel<float>::load(dir / "model.json");
  EXPECT_EQ(m.config(), cfg.model);
  const Dataset va = build_dataset(val_recipes(cfg), cfg.loss.beta);
  EXPECT_NEAR(dataset_loss(m, va, cfg.batch, cfg.loss), best, 1e-6 * best);
}

TEST(Trainer, SameSeedIsByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  train::train(small_run(4), a);
  train::train(small_run(4), b);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "model.json"), slurp(b / "model.json"));
  EXPECT_EQ(slurp(a / "model.bin"), slurp(b / "model.bin"));
  const auto c = scratch("det_c");
  train::train(small_run(5), c);
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
}

TEST(Trainer, MaxStepsStopsEarly) {
  auto cfg = small_run(6);
  cfg.max_steps = 1;
  const auto res = train::train(cfg, scratch("steps"));
  EXPECT_EQ(res.steps, 1u);
  EXPECT_EQ(res.log.size(), 1u);
}
