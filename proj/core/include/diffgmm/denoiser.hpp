#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/gmm.hpp"
#include "diffgmm/metrics.hpp"
#include "diffgmm/model.hpp"

namespace diffgmm::denoise {

/// T positive step fractions summing to 1.
struct ReverseSchedule {
  std::vector<double> step_sizes;

  static ReverseSchedule uniform(std::size_t steps);
  std::size_t steps() const noexcept { return step_sizes.size(); }
  void validate() const;
};

inline constexpr std::size_t kDefaultSteps = 5;

struct NoiseEstimate {
  std::vector<double> noise;
  std::optional<gmm::GmmParams> mixture;
};

/// Anything that maps a signal to an estimate of the additive noise in it.
class NoiseEstimator {
 public:
  virtual ~NoiseEstimator() = default;
  virtual NoiseEstimate estimate(std::span<const double> signal) const = 0;
};

/// Runs a trained network on arbitrary-length input (pads, then truncates).
class ModelEstimator final : public NoiseEstimator {
 public:
  /// Throws ContractError for an untrained model or gmm-only mode.
  explicit ModelEstimator(const model::Model& model);
  NoiseEstimate estimate(std::span<const double> signal) const override;

 private:
  const model::Model& model_;
};

struct StepRecord {
  std::size_t step = 0;
  double step_size = 0.0;
  /// Energy of the noise estimate removed at this step, |step_size * n_t|^2.
  double residual_energy = 0.0;
  /// |c_t - clean|^2 when a clean reference was supplied.
  std::optional<double> error_energy;
  std::optional<gmm::GmmParams> mixture;
};

struct DenoiseReport {
  std::string mode;
  std::vector<StepRecord> steps;
  std::optional<metrics::MetricResult> input_metrics;
  std::optional<metrics::MetricResult> output_metrics;

  std::vector<double> residual_energies() const;
  std::string to_json(int indent = 2) const;
};

struct DenoiseOptions {
  /// Estimate the noise once and reuse it for every step.
  bool freeze_estimate = false;
  /// Optional clean reference for per-step error and metrics.
  const AudioClip* reference = nullptr;
};

struct DenoiseResult {
  AudioClip denoised;
  DenoiseReport report;
};

/// c_0 = x; c_t = c_{t-1} - step_sizes[t] * n_t, where n_t estimates the noise
/// in c_{t-1} (or in x when frozen). Returns c_T.
DenoiseResult denoise(const NoiseEstimator& estimator, const AudioClip& noisy,
                      const ReverseSchedule& schedule, const DenoiseOptions& options = {},
                      const std::string& mode_label = "custom");

/// Dispatches on the model's ablation mode; gmm-only runs denoise_gmm_only
/// with the model's component count.
DenoiseResult denoise(const model::Model& model, const AudioClip& noisy, const ReverseSchedule& schedule,
                      const DenoiseOptions& options = {});

struct GmmOnlyOptions {
  std::size_t components = gmm::kDefaultComponents;
  std::uint64_t seed = 0;
  std::size_t max_iters = 200;
  double tol = 1e-8;
  const AudioClip* reference = nullptr;
};

/// EM on the noisy samples; the component with the largest weight is taken as
/// the noise floor and its posterior-mean contribution r_nk* mu_k* is
/// subtracted. Constant input raises DegenerateDataError.
DenoiseResult denoise_gmm_only(const AudioClip& noisy, const GmmOnlyOptions& options);

/// The x_app_noisy term used by denoise_gmm_only for a given fit.
std::vector<double> gmm_only_noise(const gmm::GmmParams& fit, std::span<const double> signal);

struct ComponentCurve {
  std::size_t component = 0;
  double weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> density;  // w_k N(a | mu_k, var_k) on the shared grid
};

struct DecompositionReport {
  std::vector<double> grid;
  std::vector<ComponentCurve> curves;
  std::vector<double> estimated_noise;
  std::vector<double> true_noise;

  /// Curves as CSV: amplitude, density_1, ..., density_K.
  std::string curves_csv() const;
  std::string to_json(int indent = 2) const;
};

struct DecomposeOptions {
  /// Grid spacing is at most min_k sqrt(var_k) / points_per_sigma.
  double points_per_sigma = 8.0;
  std::size_t min_points = 1001;
  std::size_t max_points = 2000001;
};

/// Per-component density curves on a uniform grid covering mu_k +- 6 sigma_k
/// for every component, plus the estimated/true noise overlay when given.
DecompositionReport decompose_report(const gmm::GmmParams& mixture,
                                     std::span<const double> estimated_noise = {},
                                     std::span<const double> true_noise = {},
                                     const DecomposeOptions& options = {});

/// Trapezoid integral of a sampled curve over a uniform grid.
double trapezoid(std::span<const double> grid, std::span<const double> values);

}  // namespace diffgmm::denoise
