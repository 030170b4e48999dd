#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "diffgmm/gmm.hpp"
#include "diffgmm/model.hpp"
#include "diffgmm/train.hpp"

namespace diffgmm {

/// Three-level noise: weights (0.25, 0.5, 0.25), means (-1, 0, 1), variance
/// 0.01. Synthesis rescales it to the requested input SNR.
gmm::GmmParams default_noise_gmm();

struct SuiteConfig {
  std::size_t train_clips = 32;
  std::size_t test_clips = 8;
  double duration_s = 2.0;
  int sample_rate_hz = 16000;
  double input_snr_db = 0.0;
  std::uint64_t seed = 1234;
  gmm::GmmParams noise_gmm = default_noise_gmm();
};

struct DenoiseSettings {
  std::size_t steps = 5;
  bool freeze = false;
};

/// Everything one experiment needs. train.seed also seeds model init.
struct RunConfig {
  model::UNetConfig unet;
  model::AblationMode mode = model::AblationMode::full;
  model::TrainConfig train;
  DenoiseSettings denoise;
  SuiteConfig suite;

  /// key = value lines that parse_config reads back to an equal config.
  std::string to_text() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values raise ContractError. Keys not present keep their defaults.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets a single key; same keys and errors as parse_config.
void set_option(RunConfig& config, std::string_view key, std::string_view value);

/// DIFFGMM_SEED, when set, replaces train.seed.
void apply_env_overrides(RunConfig& config);

}  // namespace diffgmm
