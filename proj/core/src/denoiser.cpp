#include "diffgmm/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "diffgmm/errors.hpp"
#include "json.hpp"

namespace diffgmm::denoise {
namespace {

double energy(std::span<const double> v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

nlohmann::json metrics_json(const metrics::MetricResult& m) {
  return {{"sdr_db", m.sdr_db}, {"si_snr_db", m.si_snr_db}, {"seg_snr_db", m.seg_snr_db}, {"capped", m.capped}};
}

nlohmann::json gmm_json(const gmm::GmmParams& p) {
  return {{"K", p.components()}, {"weights", p.weights}, {"means", p.means}, {"variances", p.variances}};
}

}  // namespace

ReverseSchedule ReverseSchedule::uniform(std::size_t steps) {
  if (steps == 0) throw_contract("schedule needs at least one step");
  return ReverseSchedule{std::vector<double>(steps, 1.0 / static_cast<double>(steps))};
}

void ReverseSchedule::validate() const {
  if (step_sizes.empty()) throw_contract("schedule needs at least one step");
  double total = 0.0;
  for (double s : step_sizes) {
    if (!(s > 0.0)) throw_contract("schedule step sizes must be positive");
    total += s;
  }
  if (std::abs(total - 1.0) > 1e-12) throw_contract("schedule step sizes must sum to 1");
}

ModelEstimator::ModelEstimator(const model::Model& model) : model_(model) {
  if (model.mode() == model::AblationMode::gmm_only) {
    throw_contract("gmm-only mode has no network estimator");
  }
  if (!model.trained()) throw_contract("model has not been trained");
}

NoiseEstimate ModelEstimator::estimate(std::span<const double> signal) const {
  const std::size_t mult = model_.config().length_multiple();
  const std::size_t padded = std::max(mult, (signal.size() + mult - 1) / mult * mult);
  std::vector<double> input(padded, 0.0);
  std::copy(signal.begin(), signal.end(), input.begin());
  model::ForwardOutput out = model_.forward(input);
  NoiseEstimate est;
  est.noise.assign(out.noise_estimate.begin(), out.noise_estimate.begin() + static_cast<std::ptrdiff_t>(signal.size()));
  if (model_.mode() == model::AblationMode::full) est.mixture = std::move(out.gmm);
  return est;
}

std::vector<double> DenoiseReport::residual_energies() const {
  std::vector<double> e;
  e.reserve(steps.size());
  for (const auto& s : steps) e.push_back(s.residual_energy);
  return e;
}

std::string DenoiseReport::to_json(int indent) const {
  nlohmann::json j;
  j["mode"] = mode;
  nlohmann::json steps_json = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json e{{"step", s.step}, {"step_size", s.step_size}, {"residual_energy", s.residual_energy}};
    if (s.error_energy) e["error_energy"] = *s.error_energy;
    if (s.mixture) e["gmm"] = gmm_json(*s.mixture);
    steps_json.push_back(std::move(e));
  }
  j["steps"] = std::move(steps_json);
  if (input_metrics) j["input_metrics"] = metrics_json(*input_metrics);
  if (output_metrics) j["metrics"] = metrics_json(*output_metrics);
  return j.dump(indent);
}

DenoiseResult denoise(const NoiseEstimator& estimator, const AudioClip& noisy,
                      const ReverseSchedule& schedule, const DenoiseOptions& options,
                      const std::string& mode_label) {
  validate_clip(noisy);
  schedule.validate();
  const AudioClip* ref = options.reference;
  if (ref != nullptr && ref->size() != noisy.size()) throw_contract("reference length differs from input");

  DenoiseResult result;
  result.report.mode = mode_label;
  std::vector<double> current = noisy.samples;

  std::optional<NoiseEstimate> frozen;
  for (std::size_t t = 0; t < schedule.steps(); ++t) {
    NoiseEstimate est;
    if (options.freeze_estimate) {
      if (!frozen) frozen = estimator.estimate(current);
      est = *frozen;
    } else {
      est = estimator.estimate(current);
    }
    if (est.noise.size() != current.size()) throw_shape("estimator returned a noise estimate of the wrong length");

    const double step = schedule.step_sizes[t];
    StepRecord rec;
    rec.step = t + 1;
    rec.step_size = step;
    double removed = 0.0;
    for (std::size_t n = 0; n < current.size(); ++n) {
      const double delta = step * est.noise[n];
      current[n] -= delta;
      removed += delta * delta;
    }
    if (!std::isfinite(removed)) throw NumericError("denoise produced non-finite samples");
    rec.residual_energy = removed;
    if (ref != nullptr) {
      double err = 0.0;
      for (std::size_t n = 0; n < current.size(); ++n) {
        const double d = current[n] - ref->samples[n];
        err += d * d;
      }
      rec.error_energy = err;
    }
    rec.mixture = std::move(est.mixture);
    result.report.steps.push_back(std::move(rec));
  }

  result.denoised = AudioClip(std::move(current), noisy.sample_rate_hz);
  if (ref != nullptr && energy(ref->samples) > 0.0) {
    result.report.input_metrics = metrics::evaluate(*ref, noisy);
    result.report.output_metrics = metrics::evaluate(*ref, result.denoised);
  }
  return result;
}

DenoiseResult denoise(const model::Model& model, const AudioClip& noisy, const ReverseSchedule& schedule,
                      const DenoiseOptions& options) {
  if (model.mode() == model::AblationMode::gmm_only) {
    GmmOnlyOptions g;
    g.components = model.config().components;
    g.reference = options.reference;
    return denoise_gmm_only(noisy, g);
  }
  const ModelEstimator estimator(model);
  return denoise(estimator, noisy, schedule, options, model::to_string(model.mode()));
}

std::vector<double> gmm_only_noise(const gmm::GmmParams& fit, std::span<const double> signal) {
  const std::size_t noise_k = static_cast<std::size_t>(
      std::max_element(fit.weights.begin(), fit.weights.end()) - fit.weights.begin());
  const gmm::Responsibilities r = gmm::responsibilities(fit, signal);
  std::vector<double> out(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) out[n] = r(n, noise_k) * fit.means[noise_k];
  return out;
}

DenoiseResult denoise_gmm_only(const AudioClip& noisy, const GmmOnlyOptions& options) {
  validate_clip(noisy);
  const AudioClip* ref = options.reference;
  if (ref != nullptr && ref->size() != noisy.size()) throw_contract("reference length differs from input");

  gmm::EmOptions em;
  em.components = options.components;
  em.seed = options.seed;
  em.max_iters = options.max_iters;
  em.tol = options.tol;
  const gmm::EmResult fit = gmm::em_fit(noisy.samples, em);
  const std::vector<double> app_noise = gmm_only_noise(fit.params, noisy.samples);

  DenoiseResult result;
  result.report.mode = model::to_string(model::AblationMode::gmm_only);
  std::vector<double> out(noisy.size());
  StepRecord rec;
  rec.step = 1;
  rec.step_size = 1.0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = noisy.samples[n] - app_noise[n];
    rec.residual_energy += app_noise[n] * app_noise[n];
  }
  if (ref != nullptr) {
    double err = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n) {
      const double d = out[n] - ref->samples[n];
      err += d * d;
    }
    rec.error_energy = err;
  }
  rec.mixture = fit.params;
  result.report.steps.push_back(std::move(rec));
  result.denoised = AudioClip(std::move(out), noisy.sample_rate_hz);
  if (ref != nullptr && energy(ref->samples) > 0.0) {
    result.report.input_metrics = metrics::evaluate(*ref, noisy);
    result.report.output_metrics = metrics::evaluate(*ref, result.denoised);
  }
  return result;
}

}  // namespace diffgmm::denoise
