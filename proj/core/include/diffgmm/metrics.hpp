#pragma once

#include <cstddef>
#include <span>

#include "diffgmm/audio_io.hpp"

namespace diffgmm::metrics {

/// Value reported for a zero (or negligible) residual.
inline constexpr double kCapDb = 120.0;
inline constexpr double kSegSnrMinDb = -10.0;
inline constexpr double kSegSnrMaxDb = 35.0;
inline constexpr std::size_t kDefaultSegFrame = 512;

struct MetricResult {
  double sdr_db = 0.0;
  double si_snr_db = 0.0;
  double seg_snr_db = 0.0;
  bool capped = false;  // sdr or si_snr hit the +120 dB cap
};

struct Db {
  double value = 0.0;
  bool capped = false;
};

/// 10 log10(|y|^2 / |y - y_hat|^2), capped at +120 dB.
Db sdr(std::span<const double> reference, std::span<const double> estimate);

/// Scale-invariant SNR after mean removal, capped at +120 dB and floored at
/// -120 dB.
Db si_snr(std::span<const double> reference, std::span<const double> estimate);

/// Mean of per-frame SNRs, each clamped to [-10, 35] dB. The trailing partial
/// frame is dropped.
double seg_snr(std::span<const double> reference, std::span<const double> estimate,
               std::size_t frame = kDefaultSegFrame);

/// All three metrics. seg_snr falls back to a single frame covering the whole
/// clip when it is shorter than the default frame.
MetricResult evaluate(std::span<const double> reference, std::span<const double> estimate);
MetricResult evaluate(const AudioClip& reference, const AudioClip& estimate);

}  // namespace diffgmm::metrics
