#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/config.hpp"
#include "diffgmm/gmm.hpp"
#include "diffgmm/metrics.hpp"
#include "diffgmm/model.hpp"

namespace diffgmm::harness {

enum class CleanKind { sine, chirp, multitone, speech_like_ar };

std::string to_string(CleanKind kind);
CleanKind parse_clean_kind(std::string_view text);

/// RMS every synthetic clean clip is scaled to before the noise is added.
inline constexpr double kCleanRms = 0.2;

struct SynthSpec {
  CleanKind clean_kind = CleanKind::sine;
  double duration_s = 2.0;
  int sample_rate_hz = 16000;
  gmm::GmmParams noise_gmm;
  double target_input_snr_db = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Clean signal of `length` samples, scaled to kCleanRms.
std::vector<double> synth_clean(CleanKind kind, std::size_t length, int sample_rate_hz, std::uint64_t seed);

/// Fixed order-8 AR coefficients used by speech_like_ar:
/// y[n] = e[n] - sum_i a[i] y[n-1-i].
const std::vector<double>& speech_ar_coefficients();

/// clean from the generator, noise drawn i.i.d. from noise_gmm and scaled to
/// the requested input SNR, noisy = clean + noise. The stored noise is
/// noisy - clean. Throws ContractError for zero-energy clean.
NoisyPair synth_pair(const SynthSpec& spec);

struct Suite {
  std::vector<NoisyPair> train;
  std::vector<NoisyPair> test;
};

/// Builds train_clips + test_clips pairs. Clip i uses clean kind i mod 4
/// (sine, chirp, multitone, speech_like_ar) and seed derived from
/// (suite seed, split, i).
Suite make_suite(const SuiteConfig& config);

SynthSpec suite_clip_spec(const SuiteConfig& config, bool test_split, std::size_t index);

/// Writes <dir>/{train,test}/{noisy,clean}/clip_NNN.wav (float32).
void write_suite(const Suite& suite, const std::filesystem::path& dir);

// ---- dataset ingestion ----

enum class DatasetLayout { paired_dirs, voicebank_demand, birdsounds };

std::string to_string(DatasetLayout layout);
DatasetLayout parse_layout(std::string_view text);

struct PairRef {
  std::string stem;
  std::filesystem::path noisy;
  std::filesystem::path clean;

  /// Reads both files, resamples to `rate_hz` and truncates to the shorter.
  NoisyPair load(int rate_hz = 16000) const;
};

struct SkipEntry {
  std::filesystem::path file;
  std::string reason;
};

struct Dataset {
  std::vector<PairRef> pairs;
  std::vector<SkipEntry> skipped;

  std::vector<NoisyPair> load_all(int rate_hz = 16000) const;
};

/// Lists pairs by matching file stems between noisy and clean trees without
/// decoding any audio. Layouts:
///   paired_dirs      root/noisy/*.wav, root/clean/*.wav
///   voicebank_demand every root/noisy_<name> with a root/clean_<name> sibling
///   birdsounds       root[/<split>]/Raw_audios with Denoised_audios
/// Throws IoError when the expected directories are missing and
/// DegenerateDataError when no pair matches.
Dataset ingest_dataset(const std::filesystem::path& root, DatasetLayout layout);

// ---- experiments ----

struct ClipResult {
  std::string id;
  metrics::MetricResult before;
  metrics::MetricResult after;
};

struct ExperimentRecord {
  std::string label;
  std::string config_snapshot;
  std::vector<ClipResult> clips;
  metrics::MetricResult mean_before;
  metrics::MetricResult mean_after;
  double wall_seconds = 0.0;

  double sdr_gain_db() const { return mean_after.sdr_db - mean_before.sdr_db; }
  double si_snr_gain_db() const { return mean_after.si_snr_db - mean_before.si_snr_db; }

  /// Per-clip rows followed by a "mean" row.
  std::string to_csv() const;
  std::string to_json(bool timestamp = true, int indent = 2) const;
};

/// Denoises each pair with the model (any mode) and records metrics before
/// and after. `ids` may be empty (clips are then numbered).
ExperimentRecord evaluate(const model::Model& model, std::span<const NoisyPair> pairs,
                          const DenoiseSettings& settings, std::span<const std::string> ids = {},
                          const std::string& label = "eval");

/// Trains a fresh model on suite.train and evaluates it on suite.test.
ExperimentRecord train_and_evaluate(const Suite& suite, const RunConfig& config, const std::string& label,
                                    model::Model* trained_out = nullptr);

struct SweepRow {
  std::size_t components = 0;
  double mean_sdr_db = 0.0;
  double mean_si_snr_db = 0.0;
};

/// One fresh full-mode model per K with identical seeds and budget.
std::vector<SweepRow> sweep_k(std::span<const std::size_t> ks, const RunConfig& config);
std::string sweep_csv(std::span<const SweepRow> rows);
/// K with the highest mean SDR (first on ties).
std::size_t best_k(std::span<const SweepRow> rows);

struct AblationRow {
  model::AblationMode mode = model::AblationMode::full;
  double mean_sdr_db = 0.0;
  double mean_si_snr_db = 0.0;
};

/// gmm-only, diffusion-only, full, in that order, on one suite with shared
/// seeds and budget.
std::vector<AblationRow> run_ablation(const RunConfig& config);
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace diffgmm::harness
