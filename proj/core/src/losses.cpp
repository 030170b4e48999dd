#include <cmath>

#include "diffgmm/errors.hpp"
#include "diffgmm/train.hpp"

namespace diffgmm::model {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::l2: return "l2";
    case LossKind::l1: return "l1";
    case LossKind::l2_plus_nll: return "l2+nll";
    case LossKind::simple: return "simple";
  }
  return "l2";
}

LossKind parse_loss(std::string_view text) {
  if (text == "l2") return LossKind::l2;
  if (text == "l1") return LossKind::l1;
  if (text == "l2+nll" || text == "l2_plus_nll") return LossKind::l2_plus_nll;
  if (text == "simple") return LossKind::simple;
  throw ContractError("unknown loss kind: " + std::string(text));
}

double loss_regression(std::span<const double> estimate, std::span<const double> truth,
                       RegressionKind kind) {
  if (estimate.size() != truth.size()) throw_shape("loss_regression: length mismatch");
  double acc = 0.0;
  for (std::size_t n = 0; n < estimate.size(); ++n) {
    const double d = estimate[n] - truth[n];
    acc += kind == RegressionKind::l2 ? 0.5 * d * d : std::abs(d);
  }
  return acc;
}

grad::Var loss_regression(grad::Tape& tape, grad::Var estimate, grad::Var truth, RegressionKind kind) {
  const grad::Var diff = tape.sub(estimate, truth);
  if (kind == RegressionKind::l2) return tape.scale(tape.sum(tape.square(diff)), 0.5);
  return tape.sum(tape.abs(diff));
}

double loss_gmm_nll(const gmm::GmmParams& mixture, std::span<const double> true_noise) {
  if (true_noise.empty()) throw_contract("loss_gmm_nll: empty noise");
  return -gmm::log_likelihood(mixture, true_noise) / static_cast<double>(true_noise.size());
}

double loss_simple(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) throw_shape("loss_simple: length mismatch");
  if (prediction.empty()) throw_contract("loss_simple: empty input");
  double acc = 0.0;
  for (std::size_t n = 0; n < prediction.size(); ++n) {
    const double d = target[n] - prediction[n];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

grad::Var loss_simple(grad::Tape& tape, grad::Var prediction, grad::Var target) {
  return tape.mean(tape.square(tape.sub(target, prediction)));
}

}  // namespace diffgmm::model
