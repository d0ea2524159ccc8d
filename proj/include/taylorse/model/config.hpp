// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "taylorse/error.hpp"

namespace taylorse::model {

// Architecture hyper-parameters. Defaults are the full-size network;
// desk() is the reduced preset used for tests and CPU training.
struct TaylorConfig {
  std::size_t q = 3;                // number of high-order terms
  bool shared_high_order = false;   // one parameter set for all derivative modules
  std::size_t channels = 64;        // 2-D conv width
  std::vector<std::size_t> unet_depths{4, 3, 2, 1, 0};
  std::size_t stcm_groups = 2;
  std::size_t stcm_per_group = 4;
  std::size_t stcm_kernel = 5;
  std::vector<std::size_t> stcm_dilations{1, 2, 5, 9};
  std::size_t stcm_squeeze = 64;     // inner width of a squeezed TCM
  std::size_t deriv_features = 256;  // feature width inside a derivative module
  std::size_t bins = 161;
  double beta = 0.5;                 // spectral compression exponent

  // Channels of the high-order feature map R.
  std::size_t residual_channels() const { return channels / 4 > 0 ? channels / 4 : 1; }

  static TaylorConfig desk() {
    TaylorConfig c;
    c.channels = 16;
    c.unet_depths = {2, 1, 0};
    c.stcm_groups = 1;
    c.stcm_squeeze = 32;
    c.deriv_features = 64;
    return c;
  }

  // Frequency sizes after each encoder layer: F -> floor(F/2).
  std::vector<std::size_t> encoder_bins() const {
    std::vector<std::size_t> f{bins};
    for (std::size_t i = 0; i < unet_depths.size(); ++i) f.push_back(f.back() / 2);
    return f;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw UsageError("model config: " + m); };
    if (channels == 0) fail("channels must be > 0");
    if (unet_depths.empty()) fail("unet_depths must not be empty");
    for (std::size_t i = 1; i < unet_depths.size(); ++i)
      if (unet_depths[i] > unet_depths[i - 1]) fail("unet_depths must be nonincreasing");
    if (stcm_dilations.empty()) fail("stcm_dilations must not be empty");
    for (auto d : stcm_dilations)
      if (d == 0) fail("dilations must be positive");
    if (stcm_kernel == 0 || stcm_squeeze == 0 || deriv_features == 0)
      fail("S-TCM sizes must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) fail("beta must be in (0, 1]");
    // Each stride-2 layer needs at least 2 bins (3 after padding).
    const auto f = encoder_bins();
    for (std::size_t i = 0; i < unet_depths.size(); ++i) {
      bool ok = f[i] >= 2;
      std::size_t s = f[i + 1];
      for (std::size_t j = 0; j < unet_depths[i]; ++j, s /= 2) ok = ok && s >= 2;
      if (!ok) fail("bins=" + std::to_string(bins) + " too small for the encoder depths");
    }
  }

  friend bool operator==(const TaylorConfig&, const TaylorConfig&) = default;
};

inline void to_json(nlohmann::json& j, const TaylorConfig& c) {
  j = nlohmann::json{{"q", c.q},
                     {"shared_high_order", c.shared_high_order},
                     {"channels", c.channels},
                     {"unet_depths", c.unet_depths},
                     {"stcm_groups", c.stcm_groups},
                     {"stcm_per_group", c.stcm_per_group},
                     {"stcm_kernel", c.stcm_kernel},
                     {"stcm_dilations", c.stcm_dilations},
                     {"stcm_squeeze", c.stcm_squeeze},
                     {"deriv_features", c.deriv_features},
                     {"bins", c.bins},
                     {"beta", c.beta}};
}

inline void from_json(const nlohmann::json& j, TaylorConfig& c) {
  j.at("q").get_to(c.q);
  j.at("shared_high_order").get_to(c.shared_high_order);
  j.at("channels").get_to(c.channels);
  j.at("unet_depths").get_to(c.unet_depths);
  j.at("stcm_groups").get_to(c.stcm_groups);
  j.at("stcm_per_group").get_to(c.stcm_per_group);
  j.at("stcm_kernel").get_to(c.stcm_kernel);
  j.at("stcm_dilations").get_to(c.stcm_dilations);
  j.at("stcm_squeeze").get_to(c.stcm_squeeze);
  j.at("deriv_features").get_to(c.deriv_features);
  j.at("bins").get_to(c.bins);
  j.at("beta").get_to(c.beta);
}

}  // namespace taylorse::model
