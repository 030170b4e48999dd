#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/gmm.hpp"
#include "diffgmm/grad/adam.hpp"
#include "diffgmm/grad/tape.hpp"
#include "diffgmm/model.hpp"

namespace diffgmm::model {

enum class RegressionKind { l2, l1 };

enum class LossKind {
  l2,           // 1/2 sum (est - true)^2
  l1,           // sum |est - true|
  l2_plus_nll,  // l2 + lambda * mixture NLL of the true noise
  simple,       // mean (est - true)^2 on level-augmented inputs
};

std::string to_string(LossKind kind);
LossKind parse_loss(std::string_view text);

/// l2 = 1/2 sum (est - true)^2, l1 = sum |est - true|.
double loss_regression(std::span<const double> estimate, std::span<const double> truth,
                       RegressionKind kind);
grad::Var loss_regression(grad::Tape& tape, grad::Var estimate, grad::Var truth, RegressionKind kind);

/// Negative mean log-likelihood of the true noise under `mixture`.
double loss_gmm_nll(const gmm::GmmParams& mixture, std::span<const double> true_noise);

/// Mean squared error between a noise prediction and its target.
double loss_simple(std::span<const double> prediction, std::span<const double> target);
grad::Var loss_simple(grad::Tape& tape, grad::Var prediction, grad::Var target);

struct TrainConfig {
  std::size_t iterations = 5000;
  std::size_t batch_size = 8;
  /// Random crop length per batch item; 0 trains on whole (padded) clips.
  std::size_t segment_length = 0;
  LossKind loss = LossKind::l2;
  double nll_weight = 0.1;
  grad::AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t trace_interval = 250;
  /// Train on clean + s * noise with s ~ U(0, 1], target s * noise. Always on
  /// for LossKind::simple.
  bool level_augment = false;
  /// Worker threads for per-example forward/backward; gradients are reduced
  /// in a fixed order so results do not depend on this value.
  std::size_t threads = 1;
};

struct TrainResult {
  std::vector<double> loss_trace;     // every iteration
  std::vector<double> sampled_trace;  // every trace_interval iterations
};

/// Called after each optimizer step with the 1-based iteration and its loss.
using IterationCallback = std::function<void(std::size_t iteration, const Model& model, double loss)>;

/// Alternates forward, loss against the true noise (noisy - clean), backward
/// and an Adam step for `config.iterations` iterations. Throws NumericError if
/// the loss or a gradient stops being finite.
TrainResult train(Model& model, std::span<const NoisyPair> pairs, const TrainConfig& config,
                  const IterationCallback& callback = {});

/// One training example: input signal and target noise, equal lengths that are
/// multiples of the model's length multiple.
struct Example {
  std::vector<double> input;
  std::vector<double> target;
};

/// Loss and parameter gradients for a single example.
struct ExampleGradients {
  double loss = 0.0;
  grad::Gradients grads;
};
ExampleGradients example_gradients(const Model& model, const Example& example, LossKind loss,
                                   double nll_weight);

}  // namespace diffgmm::model
