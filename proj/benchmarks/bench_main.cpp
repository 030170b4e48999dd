#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "diffgmm/gmm.hpp"
#include "diffgmm/grad/params.hpp"
#include "diffgmm/grad/tape.hpp"
#include "diffgmm/model.hpp"

using namespace diffgmm;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.5);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// C x L input, C -> C channels, kernel 5, same padding
void setup_conv(grad::ParamStore& ps, std::size_t c, std::size_t len) {
  std::mt19937_64 rng(1);
  ps.add_uniform("x", {c, len}, 1, rng);
  ps.add_uniform("w", {c, c, 5}, c * 5, rng);
  ps.add_uniform("b", {c}, c * 5, rng);
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto len = static_cast<std::size_t>(state.range(1));
  grad::ParamStore ps;
  setup_conv(ps, c, len);
  for (auto _ : state) {
    grad::Tape t;
    auto y = t.conv1d(t.param(ps, 0, {c, len}), t.param(ps, 1), t.param(ps, 2), grad::ConvSpec{c, 5, 1, 2});
    benchmark::DoNotOptimize(t.value(y).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * 5 * len));
}
BENCHMARK(BM_Conv1dForward)->Args({60, 512})->Args({60, 4096})->Args({8, 16000});

void BM_Conv1dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto len = static_cast<std::size_t>(state.range(1));
  grad::ParamStore ps;
  setup_conv(ps, c, len);
  for (auto _ : state) {
    grad::Tape t;
    auto y = t.conv1d(t.param(ps, 0, {c, len}), t.param(ps, 1), t.param(ps, 2), grad::ConvSpec{c, 5, 1, 2});
    auto g = t.backward(t.sum(t.square(y)), ps);
    benchmark::DoNotOptimize(g.per_param.data());
  }
}
BENCHMARK(BM_Conv1dBackward)->Args({60, 512})->Args({60, 4096});

void BM_UNetForward(benchmark::State& state) {
  const model::Model m(model::UNetConfig{}, model::AblationMode::full, 0);
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    auto out = m.forward(x);
    benchmark::DoNotOptimize(out.noise_estimate.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UNetForward)->Arg(512)->Arg(32000)->Unit(benchmark::kMillisecond);

const gmm::GmmParams kMix{{0.25, 0.5, 0.25}, {-1.0, 0.0, 1.0}, {0.01, 0.01, 0.01}};

void BM_EmFit(benchmark::State& state) {
  const auto data = gmm::sample(kMix, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    auto r = gmm::em_fit(data, gmm::EmOptions{5, 0, 50, 0.0});
    benchmark::DoNotOptimize(r.params.means.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}
BENCHMARK(BM_EmFit)->Arg(32000)->Unit(benchmark::kMillisecond);

void BM_LogLikelihood(benchmark::State& state) {
  const auto data = gmm::sample(kMix, static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(gmm::log_likelihood(kMix, data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogLikelihood)->Arg(32000);

}  // namespace

BENCHMARK_MAIN();
