#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/errors.hpp"

namespace diffgmm {
namespace {

constexpr double kZeroCrossings = 16.0;
constexpr double kKaiserBeta = 8.0;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double u, double half_width) {
  const double r = u / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

}  // namespace

NoisyPair NoisyPair::from_noisy_clean(AudioClip noisy, AudioClip clean) {
  NoisyPair p;
  p.noisy = std::move(noisy);
  p.clean = std::move(clean);
  if (p.noisy.size() != p.clean.size() || p.noisy.sample_rate_hz != p.clean.sample_rate_hz) {
    throw_contract("noisy and clean clips differ in length or sample rate");
  }
  AudioClip eps;
  eps.sample_rate_hz = p.noisy.sample_rate_hz;
  eps.samples.resize(p.noisy.size());
  for (std::size_t n = 0; n < eps.samples.size(); ++n) {
    eps.samples[n] = p.noisy.samples[n] - p.clean.samples[n];
  }
  p.noise = std::move(eps);
  return p;
}

void NoisyPair::validate() const {
  validate_clip(noisy);
  validate_clip(clean);
  if (noisy.size() != clean.size() || noisy.sample_rate_hz != clean.sample_rate_hz) {
    throw_contract("noisy and clean clips differ in length or sample rate");
  }
  if (noise) {
    if (noise->size() != noisy.size()) throw_contract("noise length differs from noisy length");
    for (std::size_t n = 0; n < noisy.size(); ++n) {
      if (noise->samples[n] != noisy.samples[n] - clean.samples[n]) {
        throw_contract("stored noise is not noisy - clean");
      }
    }
  }
}

std::vector<double> NoisyPair::true_noise() const {
  if (noise) return noise->samples;
  std::vector<double> eps(noisy.size());
  for (std::size_t n = 0; n < eps.size(); ++n) eps[n] = noisy.samples[n] - clean.samples[n];
  return eps;
}

double resample_kernel_half_width(double cutoff) { return kZeroCrossings / cutoff; }

double resample_kernel(double u, double cutoff) {
  return cutoff * sinc(cutoff * u) * kaiser(u, resample_kernel_half_width(cutoff));
}

AudioClip resample(const AudioClip& clip, int target_rate_hz) {
  if (target_rate_hz <= 0) throw_contract("target sample rate must be positive");
  validate_clip(clip);
  if (target_rate_hz == clip.sample_rate_hz) return clip;

  const auto src = static_cast<std::uint64_t>(clip.sample_rate_hz);
  const auto dst = static_cast<std::uint64_t>(target_rate_hz);
  const std::uint64_t len = clip.size();
  const std::uint64_t out_len = (len * dst + src / 2) / src;

  const double cutoff = std::min(1.0, static_cast<double>(dst) / static_cast<double>(src));
  const double half = resample_kernel_half_width(cutoff);

  AudioClip out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(out_len);
  if (len == 0) return out;

  const auto last = static_cast<long long>(len) - 1;
  for (std::uint64_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m * src) / static_cast<double>(dst);
    const auto lo = std::max<long long>(0, static_cast<long long>(std::ceil(t - half)));
    const auto hi = std::min<long long>(last, static_cast<long long>(std::floor(t + half)));
    double acc = 0.0;
    double wsum = 0.0;
    for (long long j = lo; j <= hi; ++j) {
      const double w = resample_kernel(t - static_cast<double>(j), cutoff);
      acc += w * clip.samples[static_cast<std::size_t>(j)];
      wsum += w;
    }
    if (std::abs(wsum) > 1e-12) {
      out.samples[m] = acc / wsum;
    } else {
      const auto nearest = std::clamp<long long>(std::llround(t), 0, last);
      out.samples[m] = clip.samples[static_cast<std::size_t>(nearest)];
    }
  }
  return out;
}

PaddedClip pad_to_multiple(const AudioClip& clip, std::size_t multiple) {
  if (multiple == 0) throw_contract("pad multiple must be >= 1");
  PaddedClip out{clip, clip.size()};
  const std::size_t rem = clip.size() % multiple;
  if (rem != 0) out.clip.samples.resize(clip.size() + (multiple - rem), 0.0);
  return out;
}

AudioClip truncate(const AudioClip& clip, std::size_t length) {
  if (length > clip.size()) throw_contract("truncate length exceeds clip length");
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.assign(clip.samples.begin(), clip.samples.begin() + static_cast<std::ptrdiff_t>(length));
  return out;
}

}  // namespace diffgmm
