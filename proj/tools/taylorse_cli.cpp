// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
// taylorse: train, enhance, eval, inspect and selftest.

#include <CLI11.hpp>

#include <iostream>

#include "taylorse/dsp/wav.hpp"
#include "taylorse/metrics/metrics.hpp"
#include "taylorse/pipeline.hpp"
#include "taylorse/selftest.hpp"
#include "taylorse/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace taylorse;

namespace {

struct Args {
  std::string config, out, in, ckpt, classical, pairs;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_train(const Args& a) {
  auto cfg = train::load_train_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  std::cout << "epoch,train_loss,val_loss,lr\n";
  const auto res = train::train(cfg, a.out, &std::cout);
  std::cout << "best val_loss " << res.best_val << " after " << res.steps << " steps\n"
            << "checkpoint " << res.checkpoint.string() << '\n';
  return 0;
}

int cmd_enhance(const Args& a) {
  const auto noisy = dsp::read_wav(a.in);
  dsp::Waveform out;
  if (!a.classical.empty()) {
    out = enhance_classical(noisy, classical_from_string(a.classical));
  } else {
    if (a.ckpt.empty()) throw UsageError("enhance needs --ckpt or --classical");
    auto m = model::TaylorModel<float>::load(a.ckpt);
    out = enhance(m, noisy);
  }
  dsp::write_wav(a.out, out);
  return 0;
}

struct Pair {
  std::string id;
  fs::path noisy, clean;
};

std::vector<Pair> read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::vector<Pair> pairs;
  std::string line, missing;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(n) + ": expected 'noisy_path,clean_path'");
    Pair p{"", line.substr(0, comma), line.substr(comma + 1)};
    for (const auto* f : {&p.noisy, &p.clean})
      if (!fs::is_regular_file(*f)) missing += "\n  missing: " + f->string();
    p.id = std::to_string(pairs.size()) + "_" + p.noisy.stem().string();
    pairs.push_back(std::move(p));
  }
  if (!missing.empty()) throw DataError("manifest " + path.string() + " references missing files:" + missing);
  return pairs;
}

int cmd_eval(const Args& a) {
  const auto pairs = read_manifest(a.pairs);
  std::optional<model::TaylorModel<float>> m;
  if (!a.ckpt.empty()) m.emplace(model::TaylorModel<float>::load(a.ckpt));
  const std::optional<Classical> cl =
      a.classical.empty() ? std::nullopt : std::optional(classical_from_string(a.classical));
  metrics::MetricReport rep;
  for (const auto& p : pairs) {
    const auto noisy = dsp::read_wav(p.noisy), clean = dsp::read_wav(p.clean);
    if (noisy.size() != clean.size())
      throw DataError("pair " + p.id + ": noisy and clean lengths differ");
    rep.add(p.id + "/noisy", metrics::sisnr(noisy, clean), metrics::log_spectral_distance(noisy, clean));
    if (m || cl) {
      const auto e = m ? enhance(*m, noisy) : enhance_classical(noisy, *cl);
      rep.add(p.id + "/enhanced", metrics::sisnr(e, clean), metrics::log_spectral_distance(e, clean));
    }
  }
  std::vector<metrics::MetricRow> means;
  if (!pairs.empty()) {
    means.push_back(rep.mean("/noisy"));
    if (m || cl) means.push_back(rep.mean("/enhanced"));
  }
  if (a.out.empty()) {
    rep.write_csv(std::cout, means);
  } else {
    std::ofstream os(a.out);
    if (!os) throw DataError("cannot write " + a.out);
    rep.write_csv(os, means);
  }
  return 0;
}

int cmd_inspect(const Args& a) {
  const auto noisy = dsp::read_wav(a.in);
  auto m = model::TaylorModel<float>::load(a.ckpt);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw DataError("cannot create " + a.out + ": " + ec.message());
  for (const auto& [name, grid] : order_export(m, noisy).grids) {
    write_spectrogram_csv(fs::path(a.out) / (name + ".csv"), grid);
    write_magnitude_pgm(fs::path(a.out) / (name + ".pgm"), grid);
    std::cout << name << ".csv\n";
  }
  return 0;
}

int cmd_selftest() {
  const auto res = selftest::run_all(&std::cout);
  const bool ok = std::all_of(res.begin(), res.end(), [](const auto& r) { return r.passed; });
  std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
  if (!ok) throw NumericError("selftest failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-unfolding speech enhancement"};
  app.require_subcommand(1);
  Args a;

  auto* tr = app.add_subcommand("train", "train a model on synthetic mixtures");
  tr->add_option("--config", a.config, "key = value config file")->required();
  tr->add_option("--out", a.out, "output directory")->required();
  tr->add_option("--seed", a.seed, "override the config seed");

  auto* en = app.add_subcommand("enhance", "enhance a 16 kHz mono PCM16 WAV file");
  en->add_option("--in", a.in, "noisy WAV")->required();
  en->add_option("--out", a.out, "enhanced WAV")->required();
  en->add_option("--ckpt", a.ckpt, "model checkpoint (model.json)");
  en->add_option("--classical", a.classical, "subtract or wiener instead of a model");

  auto* ev = app.add_subcommand("eval", "SISNR and LSD over noisy,clean pairs");
  ev->add_option("--pairs", a.pairs, "manifest, one noisy_path,clean_path per line")->required();
  ev->add_option("--ckpt", a.ckpt, "model checkpoint for the enhanced rows");
  ev->add_option("--classical", a.classical, "subtract or wiener for the enhanced rows");
  ev->add_option("--out", a.out, "report CSV (default stdout)");

  auto* in = app.add_subcommand("inspect", "export per-order spectra of one file");
  in->add_option("--in", a.in, "noisy WAV")->required();
  in->add_option("--ckpt", a.ckpt, "model checkpoint")->required();
  in->add_option("--out", a.out, "output directory")->required();

  auto* st = app.add_subcommand("selftest", "gradient and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }
  a.seed_set = tr->count("--seed") > 0;

  try {
    if (*tr) return cmd_train(a);
    if (*en) return cmd_enhance(a);
    if (*ev) return cmd_eval(a);
    if (*in) return cmd_inspect(a);
    if (*st) return cmd_selftest();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  }
  return static_cast<int>(ErrorKind::usage);
}
