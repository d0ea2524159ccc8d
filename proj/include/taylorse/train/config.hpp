// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Training configuration read from a line-based `key = value` file. Lines
// starting with '#' and blank lines are ignored.
//
//   preset        desk | full          model size preset (default desk)
//   q             number of high-order terms
//   shared        true | false         share derivative-module parameters
//   channels      2-D conv width
//   lr            initial learning rate
//   epochs        passes over the training set
//   batch         mixtures per step
//   snr_lo        lowest mixture SNR in dB
//   snr_hi        highest mixture SNR in dB
//   seed          global seed
//   mixtures      recipes in total; a tenth (at least one) is held out for validation
//   val_fraction  held-out share of the recipes
//   length_s      mixture length in seconds
//   beta          spectral compression exponent
//   w_ri, w_mag   loss branch weights (must sum to 1)
//   patience      epochs without improvement before the lr is reduced
//   factor        lr multiplier on a plateau
//   max_steps     stop after this many optimizer steps (0 = no limit)

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "taylorse/model/config.hpp"
#include "taylorse/train/adam.hpp"
#include "taylorse/train/loss.hpp"

namespace taylorse::train {

struct TrainConfig {
  model::TaylorConfig model = model::TaylorConfig::desk();
  std::string preset = "desk";
  AdamConfig adam;
  LossConfig loss;
  std::size_t epochs = 10;
  std::size_t batch = 4;
  double snr_lo = -5.0;
  double snr_hi = 0.0;
  std::uint64_t seed = 1;
  std::size_t mixtures = 40;
  double val_fraction = 0.1;
  double length_s = 1.0;
  std::size_t patience = 2;
  double factor = 0.5;
  std::size_t max_steps = 0;

  std::size_t val_count() const {
    const auto n = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(mixtures)));
    return std::clamp<std::size_t>(n, 1, mixtures - 1);
  }

  void validate() const {
    model.validate();
    loss.validate();
    if (epochs == 0) throw UsageError("epochs must be > 0");
    if (batch == 0 || batch > 8) throw UsageError("batch must be in [1, 8]");
    if (mixtures < 2) throw UsageError("mixtures must be >= 2 (training and validation)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must be in (0, 1)");
    if (!(snr_lo <= snr_hi)) throw UsageError("snr_lo must not exceed snr_hi");
    if (!(length_s >= 0.05)) throw UsageError("length_s must be >= 0.05");
    if (!(adam.lr > 0.0)) throw UsageError("lr must be > 0");
    if (patience == 0) throw UsageError("patience must be > 0");
    if (!(factor > 0.0 && factor < 1.0)) throw UsageError("factor must be in (0, 1)");
    if (model.beta != loss.beta) throw UsageError("model and loss beta differ");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class V>
V parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  V v{};
  if constexpr (std::is_same_v<V, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw UsageError("config key '" + key + "': expected true or false, got '" + text + "'");
  } else {
    if (std::is_unsigned_v<V> && text.starts_with("-"))
      throw UsageError("config key '" + key + "': expected a nonnegative value, got '" + text + "'");
    if (!(is >> v) || !(is >> std::ws).eof())
      throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace detail

inline TrainConfig parse_train_config(std::istream& in, const std::string& origin = "config") {
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string val = detail::trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw UsageError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    if (!kv.emplace(key, val).second)
      throw UsageError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
  }

  TrainConfig c;
  if (auto it = kv.find("preset"); it != kv.end()) {
    if (it->second == "desk") {
      c.model = model::TaylorConfig::desk();
    } else if (it->second == "full") {
      c.model = model::TaylorConfig{};
    } else {
      throw UsageError("config key 'preset': expected desk or full, got '" + it->second + "'");
    }
    c.preset = it->second;
    kv.erase(it);
  }
  using detail::parse_value;
  for (const auto& [k, v] : kv) {
    if (k == "q") c.model.q = parse_value<std::size_t>(k, v);
    else if (k == "shared") c.model.shared_high_order = parse_value<bool>(k, v);
    else if (k == "channels") c.model.channels = parse_value<std::size_t>(k, v);
    else if (k == "lr") c.adam.lr = parse_value<double>(k, v);
    else if (k == "epochs") c.epochs = parse_value<std::size_t>(k, v);
    else if (k == "batch") c.batch = parse_value<std::size_t>(k, v);
    else if (k == "snr_lo") c.snr_lo = parse_value<double>(k, v);
    else if (k == "snr_hi") c.snr_hi = parse_value<double>(k, v);
    else if (k == "seed") c.seed = parse_value<std::uint64_t>(k, v);
    else if (k == "mixtures") c.mixtures = parse_value<std::size_t>(k, v);
    else if (k == "val_fraction") c.val_fraction = parse_value<double>(k, v);
    else if (k == "length_s") c.length_s = parse_value<double>(k, v);
    else if (k == "beta") c.model.beta = c.loss.beta = parse_value<double>(k, v);
    else if (k == "w_ri") c.loss.w_ri = parse_value<double>(k, v);
    else if (k == "w_mag") c.loss.w_mag = parse_value<double>(k, v);
    else if (k == "patience") c.patience = parse_value<std::size_t>(k, v);
    else if (k == "factor") c.factor = parse_value<double>(k, v);
    else if (k == "max_steps") c.max_steps = parse_value<std::size_t>(k, v);
    else throw UsageError("unknown config key '" + k + "' in " + origin);
  }
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  return parse_train_config(in, path.string());
}

}  // namespace taylorse::train
