#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace diffgmm {

/// Mono waveform. Samples are nominally in [-1, 1]; the range is enforced at
/// ingestion (read_wav) by peak normalization, not on every construction.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  AudioClip() = default;
  AudioClip(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate_hz(rate) {}

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_s() const noexcept {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

/// Throws ContractError unless the rate is positive and every sample finite.
void validate_clip(const AudioClip& clip);

/// Additive noise model: noisy = clean + noise.
struct NoisyPair {
  AudioClip noisy;
  AudioClip clean;
  std::optional<AudioClip> noise;

  /// Builds a pair and sets noise[n] = noisy[n] - clean[n].
  static NoisyPair from_noisy_clean(AudioClip noisy, AudioClip clean);

  /// Throws ContractError when lengths/rates disagree or the stored noise
  /// is not exactly noisy - clean.
  void validate() const;

  /// noise if stored, otherwise computed as noisy - clean.
  std::vector<double> true_noise() const;
};

enum class WavEncoding { pcm16, float32 };

/// Reads PCM16 or IEEE float32 RIFF/WAVE, mono or stereo (stereo is averaged).
/// PCM16 value v maps to v / 32768. Unknown chunks (LIST, fact, ...) are
/// skipped. Clips whose peak exceeds 1 are rescaled to peak 0.99.
AudioClip read_wav(const std::filesystem::path& path);

/// Parses an in-memory WAV image; same semantics as read_wav.
AudioClip decode_wav(std::span<const unsigned char> bytes);

void write_wav(const AudioClip& clip, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::float32);

std::vector<unsigned char> encode_wav(const AudioClip& clip, WavEncoding encoding);

/// Scales the clip to max |sample| = target when its peak exceeds 1.
void normalize_peak(AudioClip& clip, double target = 0.99);

/// Windowed-sinc (Kaiser) resampler with 16 zero crossings per side. Output
/// length is round(len * target / source). Weights are renormalized per output
/// sample so constants pass through unchanged, including at the edges.
AudioClip resample(const AudioClip& clip, int target_rate_hz);

/// Raw (unnormalized) resampling kernel at offset u source samples, for a
/// lowpass cutoff expressed as a fraction of the source Nyquist rate.
double resample_kernel(double u, double cutoff);

/// Half-width of the resampling kernel in source samples.
double resample_kernel_half_width(double cutoff);

struct PaddedClip {
  AudioClip clip;
  std::size_t original_length = 0;
};

/// Zero-pads the tail so the length is a multiple of `multiple`.
PaddedClip pad_to_multiple(const AudioClip& clip, std::size_t multiple);

/// Inverse of pad_to_multiple.
AudioClip truncate(const AudioClip& clip, std::size_t length);

}  // namespace diffgmm
