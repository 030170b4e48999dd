#include <doctest.h>

#include <cmath>

#include "diffgmm/denoiser.hpp"
#include "diffgmm/errors.hpp"
#include "diffgmm/harness.hpp"
#include "diffgmm/train.hpp"
#include "fd.hpp"
#include "json.hpp"

using namespace diffgmm;
using namespace diffgmm::denoise;

namespace {

class ZeroEstimator final : public NoiseEstimator {
 public:
  NoiseEstimate estimate(std::span<const double> s) const override { return {std::vector<double>(s.size(), 0.0), {}}; }
};

// returns current - clean, i.e. exactly the noise left in the signal
class OracleEstimator final : public NoiseEstimator {
 public:
  explicit OracleEstimator(std::vector<double> clean) : clean_(std::move(clean)) {}
  NoiseEstimate estimate(std::span<const double> s) const override {
    std::vector<double> n(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) n[i] = s[i] - clean_[i];
    return {n, {}};
  }

 private:
  std::vector<double> clean_;
};

class FixedEstimator final : public NoiseEstimator {
 public:
  explicit FixedEstimator(std::vector<double> n) : n_(std::move(n)) {}
  NoiseEstimate estimate(std::span<const double>) const override { return {n_, {}}; }

 private:
  std::vector<double> n_;
};

NoisyPair random_pair(std::size_t n, std::uint64_t seed) {
  return NoisyPair::from_noisy_clean(AudioClip(fdcheck::random_vector(n, seed), 16000),
                                     AudioClip(fdcheck::random_vector(n, seed + 1, -0.5, 0.5), 16000));
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("schedule") {
  const ReverseSchedule s = ReverseSchedule::uniform(5);
  CHECK(s.steps() == 5);
  CHECK_NOTHROW(s.validate());
  CHECK_THROWS_AS(ReverseSchedule::uniform(0), ContractError);
  CHECK_THROWS_AS((ReverseSchedule{{0.5, 0.6}}.validate()), ContractError);
  CHECK_THROWS_AS((ReverseSchedule{{1.5, -0.5}}.validate()), ContractError);
  CHECK_THROWS_AS((ReverseSchedule{{}}.validate()), ContractError);
}

TEST_CASE("zero estimate leaves the input bit-unchanged") {
  const NoisyPair p = random_pair(999, 1);
  const auto r = denoise::denoise(ZeroEstimator{}, p.noisy, ReverseSchedule::uniform(5));
  CHECK(r.denoised.samples == p.noisy.samples);
  CHECK(r.denoised.sample_rate_hz == p.noisy.sample_rate_hz);
  CHECK(r.report.steps.size() == 5);
  for (const auto& s : r.report.steps) CHECK(s.residual_energy == 0.0);
}

TEST_CASE("oracle recovers the clean signal") {
  const NoisyPair p = random_pair(1000, 3);
  const OracleEstimator oracle(p.clean.samples);
  const auto r1 = denoise::denoise(oracle, p.noisy, ReverseSchedule::uniform(1));
  for (std::size_t i = 0; i < p.clean.size(); ++i) {
    CHECK(std::abs(r1.denoised.samples[i] - p.clean.samples[i]) <= 4e-16 * (1.0 + std::abs(p.noisy.samples[i])));
  }
  DenoiseOptions frozen;
  frozen.freeze_estimate = true;
  frozen.reference = &p.clean;
  const auto r5 = denoise::denoise(oracle, p.noisy, ReverseSchedule::uniform(5), frozen);
  for (std::size_t i = 0; i < p.clean.size(); ++i) CHECK(std::abs(r5.denoised.samples[i] - p.clean.samples[i]) < 1e-15);
  REQUIRE(r5.report.steps.back().error_energy.has_value());
  CHECK(*r5.report.steps.back().error_energy < 1e-27);
}

TEST_CASE("re-estimating oracle removes a geometric share of the noise") {
  const NoisyPair p = random_pair(500, 5);
  const OracleEstimator oracle(p.clean.samples);
  DenoiseOptions o;
  o.reference = &p.clean;
  const auto r = denoise::denoise(oracle, p.noisy, ReverseSchedule::uniform(4), o);
  const auto noise = p.true_noise();
  for (std::size_t i = 0; i < noise.size(); i += 37) {
    const double left = r.denoised.samples[i] - p.clean.samples[i];
    // (1 - 1/4)^4 of the noise is left after four uniform steps
    CHECK(left == doctest::Approx(std::pow(0.75, 4) * noise[i]).epsilon(1e-9));
  }
  const auto e = r.report.residual_energies();
  for (std::size_t t = 1; t < e.size(); ++t) CHECK(e[t] <= e[t - 1]);
}

TEST_CASE("schedule invariance for a fixed estimate") {
  const NoisyPair p = random_pair(300, 7);
  const FixedEstimator fixed(fdcheck::random_vector(300, 9));
  const auto base = denoise::denoise(fixed, p.noisy, ReverseSchedule::uniform(1)).denoised.samples;
  for (const ReverseSchedule& s : {ReverseSchedule::uniform(5), ReverseSchedule{{0.1, 0.2, 0.3, 0.4}},
                                   ReverseSchedule{{0.7, 0.3}}}) {
    const auto y = denoise::denoise(fixed, p.noisy, s).denoised.samples;
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - base[i]) < 1e-10);
  }
}

TEST_CASE("bad estimator output is rejected") {
  const NoisyPair p = random_pair(10, 1);
  const FixedEstimator wrong(std::vector<double>(9, 0.0));
  CHECK_THROWS_AS(denoise::denoise(wrong, p.noisy, ReverseSchedule::uniform(2)), ShapeError);
}

TEST_CASE("untrained model is a contract error") {
  model::UNetConfig c;
  c.depth = 2;
  c.filters = 3;
  const model::Model m(c, model::AblationMode::full, 0);
  const NoisyPair p = random_pair(64, 2);
  CHECK_THROWS_AS(denoise::denoise(m, p.noisy, ReverseSchedule::uniform(5)), ContractError);
  const model::Model d(c, model::AblationMode::diffusion_only, 0);
  CHECK_THROWS_AS(denoise::denoise(d, p.noisy, ReverseSchedule::uniform(5)), ContractError);
}

TEST_CASE("model estimator pads and truncates") {
  model::UNetConfig c;
  c.depth = 3;
  c.filters = 4;
  model::Model m(c, model::AblationMode::full, 1);
  m.set_iteration(1);
  const AudioClip x(fdcheck::random_vector(1001, 3), 8000);
  const auto r = denoise::denoise(m, x, ReverseSchedule::uniform(3));
  CHECK(r.denoised.size() == 1001);
  CHECK(r.denoised.sample_rate_hz == 8000);
  REQUIRE(r.report.steps.size() == 3);
  CHECK(r.report.steps[0].mixture.has_value());
  CHECK(r.report.mode == "full");
  const auto j = nlohmann::json::parse(r.report.to_json());
  CHECK(j.at("steps").size() == 3);
  CHECK(j.at("steps")[0].contains("gmm"));
}

TEST_CASE("gmm-only removes a large constant offset") {
  // offset on 70% of the clip; the offset cluster holds most of the samples
  const std::size_t n = 8000;
  std::vector<double> clean(n), noisy(n);
  for (std::size_t i = 0; i < n; ++i) {
    clean[i] = 0.5 * std::sin(2.0 * M_PI * 220.0 * i / 16000.0);
    noisy[i] = clean[i] + (i < n * 7 / 10 ? 3.0 : 0.0);
  }
  const AudioClip y(clean, 16000), x(noisy, 16000);
  GmmOnlyOptions o;
  o.components = 2;
  o.seed = 4;
  o.reference = &y;
  const auto r = denoise_gmm_only(x, o);
  CHECK(metrics::sdr(y.samples, r.denoised.samples).value > metrics::sdr(y.samples, x.samples).value + 10.0);
  CHECK(r.report.mode == "gmm-only");
  CHECK(r.report.steps.size() == 1);

  const auto again = denoise_gmm_only(x, o);
  CHECK(again.denoised.samples == r.denoised.samples);
}

TEST_CASE("gmm-only rejects a constant signal") {
  const AudioClip z(std::vector<double>(500, 0.0), 16000);
  CHECK_THROWS_AS(denoise_gmm_only(z, GmmOnlyOptions{}), DegenerateDataError);
}

TEST_CASE("decomposition report") {
  const gmm::GmmParams p{{0.1, 0.3, 0.2, 0.25, 0.15}, {-1.0, -0.3, 0.0, 0.4, 1.2}, {0.01, 0.2, 1e-4, 0.05, 0.3}};
  const auto est = fdcheck::random_vector(64, 1), truth = fdcheck::random_vector(64, 2);
  const DecompositionReport r = decompose_report(p, est, truth);
  REQUIRE(r.curves.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& c = r.curves[k];
    CHECK(c.weight == p.weights[k]);
    CHECK(c.mean == p.means[k]);
    CHECK(c.variance == p.variances[k]);
    CHECK(std::abs(trapezoid(r.grid, c.density) - p.weights[k]) < 1e-4);
    CHECK(r.grid.front() <= p.means[k] - 6.0 * std::sqrt(p.variances[k]));
    CHECK(r.grid.back() >= p.means[k] + 6.0 * std::sqrt(p.variances[k]));
  }
  CHECK(r.estimated_noise == est);
  CHECK(r.true_noise == truth);

  const std::string csv = r.curves_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "amplitude,density_1,density_2,density_3,density_4,density_5");
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.grid.size() + 1);

  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("K") == 5);
  CHECK(j.at("components").size() == 5);
  CHECK(j.at("overlay").at("true_noise").size() == 64);
}

TEST_CASE("trapezoid against a closed form") {
  std::vector<double> g(1001), v(1001);
  for (std::size_t i = 0; i <= 1000; ++i) {
    g[i] = i / 1000.0;
    v[i] = 3.0 * g[i] + 1.0;
  }
  CHECK(trapezoid(g, v) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("trained model removes less at every step") {
  SuiteConfig sc;
  sc.train_clips = 8;
  sc.test_clips = 2;
  sc.duration_s = 0.128;
  const harness::Suite suite = harness::make_suite(sc);
  model::UNetConfig c;
  c.depth = 4;
  c.filters = 8;
  c.components = 3;
  model::Model m(c, model::AblationMode::full, 3);
  model::TrainConfig tc;
  tc.iterations = 300;
  tc.batch_size = 4;
  tc.segment_length = 256;
  tc.adam.lr = 3e-3;
  model::train(m, suite.train, tc);
  for (const auto& p : suite.test) {
    const auto r = denoise::denoise(m, p.noisy, ReverseSchedule::uniform(5));
    const auto e = r.report.residual_energies();
    for (std::size_t t = 1; t < e.size(); ++t) CHECK(e[t] <= e[t - 1]);
  }
}

}  // TEST_SUITE
