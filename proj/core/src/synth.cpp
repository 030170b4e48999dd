#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>
#include <iomanip>

#include "diffgmm/errors.hpp"
#include "diffgmm/harness.hpp"

namespace diffgmm::harness {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void scale_to_rms(std::vector<double>& x, double rms) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double g = rms / std::sqrt(e / static_cast<double>(x.size()));
  for (double& v : x) v *= g;
}

}  // namespace

std::string to_string(CleanKind kind) {
  switch (kind) {
    case CleanKind::sine: return "sine";
    case CleanKind::chirp: return "chirp";
    case CleanKind::multitone: return "multitone";
    case CleanKind::speech_like_ar: return "speech_like_AR";
  }
  return "?";
}

CleanKind parse_clean_kind(std::string_view text) {
  if (text == "sine") return CleanKind::sine;
  if (text == "chirp") return CleanKind::chirp;
  if (text == "multitone") return CleanKind::multitone;
  if (text == "speech_like_AR" || text == "speech_like_ar" || text == "ar") return CleanKind::speech_like_ar;
  throw_contract("unknown clean kind '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
  if (!(duration_s > 0.0)) throw_contract("synth: duration must be positive");
  if (sample_rate_hz <= 0) throw_contract("synth: sample rate must be positive");
  if (!std::isfinite(target_input_snr_db)) throw_contract("synth: target SNR must be finite");
  noise_gmm.validate();
}

const std::vector<double>& speech_ar_coefficients() {
  // four resonances (normalized frequency, pole radius) multiplied out into
  // one order-8 denominator; all poles inside the unit circle
  static const std::vector<double> coeffs = [] {
    const double res[4][2] = {{0.03, 0.97}, {0.09, 0.94}, {0.16, 0.9}, {0.23, 0.85}};
    std::vector<double> poly{1.0};
    for (const auto& r : res) {
      const double a1 = -2.0 * r[1] * std::cos(kTwoPi * r[0]);
      const double a2 = r[1] * r[1];
      std::vector<double> next(poly.size() + 2, 0.0);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        next[i] += poly[i];
        next[i + 1] += poly[i] * a1;
        next[i + 2] += poly[i] * a2;
      }
      poly = std::move(next);
    }
    return std::vector<double>(poly.begin() + 1, poly.end());
  }();
  return coeffs;
}

std::vector<double> synth_clean(CleanKind kind, std::size_t length, int rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fs = static_cast<double>(rate);
  std::vector<double> y(length, 0.0);

  switch (kind) {
    case CleanKind::sine: {
      const double f = 100.0 + 900.0 * u(rng);
      const double phase = kTwoPi * u(rng);
      for (std::size_t n = 0; n < length; ++n) y[n] = std::sin(kTwoPi * f * n / fs + phase);
      break;
    }
    case CleanKind::chirp: {
      const double f0 = 100.0 + 300.0 * u(rng);
      const double f1 = 1000.0 + 2000.0 * u(rng);
      const double T = std::max(1.0, static_cast<double>(length)) / fs;
      const double k = (f1 - f0) / T;
      for (std::size_t n = 0; n < length; ++n) {
        const double t = n / fs;
        y[n] = std::sin(kTwoPi * (f0 * t + 0.5 * k * t * t));
      }
      break;
    }
    case CleanKind::multitone: {
      const int tones = 3 + static_cast<int>(u(rng) * 3.0);
      for (int i = 0; i < tones; ++i) {
        const double f = 100.0 + 1900.0 * u(rng);
        const double a = 0.3 + 0.7 * u(rng);
        const double phase = kTwoPi * u(rng);
        for (std::size_t n = 0; n < length; ++n) y[n] += a * std::sin(kTwoPi * f * n / fs + phase);
      }
      break;
    }
    case CleanKind::speech_like_ar: {
      const auto& a = speech_ar_coefficients();
      std::normal_distribution<double> g(0.0, 1.0);
      // syllable-rate envelope so the clip has pauses like speech
      const double rate_hz = 3.0 + 2.0 * u(rng);
      const double phase = kTwoPi * u(rng);
      for (std::size_t n = 0; n < length; ++n) {
        double v = g(rng);
        for (std::size_t i = 0; i < a.size() && i < n; ++i) v -= a[i] * y[n - 1 - i];
        y[n] = v;
      }
      for (std::size_t n = 0; n < length; ++n) {
        const double env = 0.5 * (1.0 + std::sin(kTwoPi * rate_hz * n / fs + phase));
        y[n] *= 0.1 + 0.9 * env;
      }
      break;
    }
  }
  scale_to_rms(y, kCleanRms);
  return y;
}

NoisyPair synth_pair(const SynthSpec& spec) {
  spec.validate();
  const auto length = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  if (length == 0) throw_contract("synth: clip would be empty");
  std::vector<double> clean = synth_clean(spec.clean_kind, length, spec.sample_rate_hz, mix_seed(spec.seed, 1));
  double ey = 0.0;
  for (double v : clean) ey += v * v;
  if (ey <= 0.0) throw_contract("synth: clean signal has zero energy");

  std::vector<double> noise = gmm::sample(spec.noise_gmm, length, mix_seed(spec.seed, 2));
  double en = 0.0;
  for (double v : noise) en += v * v;
  if (en <= 0.0) throw_contract("synth: noise sample has zero energy");
  const double g = std::sqrt(ey / (en * std::pow(10.0, spec.target_input_snr_db / 10.0)));

  std::vector<double> noisy(length);
  for (std::size_t n = 0; n < length; ++n) noisy[n] = clean[n] + g * noise[n];
  return NoisyPair::from_noisy_clean(AudioClip(std::move(noisy), spec.sample_rate_hz),
                                     AudioClip(std::move(clean), spec.sample_rate_hz));
}

SynthSpec suite_clip_spec(const SuiteConfig& config, bool test_split, std::size_t index) {
  SynthSpec s;
  s.clean_kind = static_cast<CleanKind>(index % 4);
  s.duration_s = config.duration_s;
  s.sample_rate_hz = config.sample_rate_hz;
  s.noise_gmm = config.noise_gmm;
  s.target_input_snr_db = config.input_snr_db;
  s.seed = mix_seed(config.seed, (test_split ? 1'000'000ULL : 0ULL) + index);
  return s;
}

Suite make_suite(const SuiteConfig& config) {
  Suite suite;
  suite.train.reserve(config.train_clips);
  suite.test.reserve(config.test_clips);
  for (std::size_t i = 0; i < config.train_clips; ++i) suite.train.push_back(synth_pair(suite_clip_spec(config, false, i)));
  for (std::size_t i = 0; i < config.test_clips; ++i) suite.test.push_back(synth_pair(suite_clip_spec(config, true, i)));
  return suite;
}

void write_suite(const Suite& suite, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  auto dump = [&](const std::vector<NoisyPair>& pairs, const char* split) {
    const fs::path noisy = dir / split / "noisy";
    const fs::path clean = dir / split / "clean";
    std::error_code ec;
    fs::create_directories(noisy, ec);
    fs::create_directories(clean, ec);
    if (ec) throw IoError("cannot create " + (dir / split).string() + ": " + ec.message());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::ostringstream name;
      name << "clip_" << std::setw(3) << std::setfill('0') << i << ".wav";
      write_wav(pairs[i].noisy, noisy / name.str());
      write_wav(pairs[i].clean, clean / name.str());
    }
  };
  dump(suite.train, "train");
  dump(suite.test, "test");
}

}  // namespace diffgmm::harness
