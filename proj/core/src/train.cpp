#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "diffgmm/errors.hpp"
#include "diffgmm/train.hpp"

namespace diffgmm::model {
namespace {

Example make_example(const NoisyPair& pair, std::size_t segment, std::size_t multiple,
                     std::mt19937_64& rng, bool augment) {
  const std::vector<double> noise = pair.true_noise();
  const std::size_t len = pair.noisy.size();
  std::size_t start = 0;
  std::size_t take = len;
  std::size_t padded = 0;
  if (segment > 0) {
    take = std::min(segment, len);
    if (len > segment) {
      std::uniform_int_distribution<std::size_t> pick(0, len - segment);
      start = pick(rng);
    }
    padded = segment;
  } else {
    padded = (len + multiple - 1) / multiple * multiple;
  }
  double level = 1.0;
  if (augment) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    level = 1.0 - u(rng);
  }

  Example ex;
  ex.input.assign(padded, 0.0);
  ex.target.assign(padded, 0.0);
  for (std::size_t n = 0; n < take; ++n) {
    const double eps = level * noise[start + n];
    ex.target[n] = eps;
    ex.input[n] = augment ? pair.clean.samples[start + n] + eps : pair.noisy.samples[start + n];
  }
  return ex;
}

}  // namespace

ExampleGradients example_gradients(const Model& model, const Example& example, LossKind loss,
                                   double nll_weight) {
  if (example.input.size() != example.target.size()) throw_shape("example input/target length mismatch");
  grad::Tape tape;
  const grad::Shape shape{1, example.input.size()};
  const grad::Var x = tape.constant(shape, example.input);
  const grad::Var truth = tape.constant(shape, example.target);
  const ForwardGraph g = model.build(tape, x);

  grad::Var objective;
  switch (loss) {
    case LossKind::l2:
      objective = loss_regression(tape, g.noise, truth, RegressionKind::l2);
      break;
    case LossKind::l1:
      objective = loss_regression(tape, g.noise, truth, RegressionKind::l1);
      break;
    case LossKind::l2_plus_nll: {
      if (model.mode() != AblationMode::full) {
        throw_contract("l2+nll needs the mixture head (full mode)");
      }
      const grad::Var reg = loss_regression(tape, g.noise, truth, RegressionKind::l2);
      const grad::Var nll = tape.mixture_nll(g.weights, g.means, g.variances, example.target);
      objective = tape.add(reg, tape.scale(nll, nll_weight));
      break;
    }
    case LossKind::simple:
      objective = loss_simple(tape, g.noise, truth);
      break;
  }
  ExampleGradients out;
  out.loss = tape.scalar_value(objective);
  if (!std::isfinite(out.loss)) throw NumericError("training loss is not finite");
  out.grads = tape.backward(objective, model.params());
  return out;
}

TrainResult train(Model& model, std::span<const NoisyPair> pairs, const TrainConfig& config,
                  const IterationCallback& callback) {
  if (model.mode() == AblationMode::gmm_only) throw_contract("gmm-only mode has nothing to train");
  if (pairs.empty()) throw_contract("train: no training pairs");
  if (config.batch_size == 0) throw_contract("train: batch_size must be positive");
  const std::size_t multiple = model.config().length_multiple();
  if (config.segment_length % multiple != 0) {
    throw_contract("train: segment_length must be a multiple of " + std::to_string(multiple));
  }
  for (const auto& p : pairs) {
    if (p.noisy.size() != p.clean.size()) throw_contract("train: pair lengths differ");
    if (p.noisy.empty()) throw_contract("train: empty training clip");
  }

  const bool augment = config.level_augment || config.loss == LossKind::simple;
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, config.batch_size));
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);

  TrainResult result;
  result.loss_trace.reserve(config.iterations);
  model.set_trace_interval(config.trace_interval);

  std::vector<Example> batch(config.batch_size);
  std::vector<ExampleGradients> per_example(config.batch_size);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (auto& ex : batch) {
      const NoisyPair& p = pairs[pick_pair(rng)];
      ex = make_example(p, config.segment_length, multiple, rng, augment);
    }

    if (threads == 1) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        per_example[b] = example_gradients(model, batch[b], config.loss, config.nll_weight);
      }
    } else {
      std::vector<std::thread> workers;
      std::vector<std::exception_ptr> errors(threads);
      for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
          try {
            for (std::size_t b = w; b < batch.size(); b += threads) {
              per_example[b] = example_gradients(model, batch[b], config.loss, config.nll_weight);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : workers) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    grad::Gradients total = grad::Gradients::zeros_like(model.params());
    double loss = 0.0;
    for (const auto& eg : per_example) {
      total.accumulate(eg.grads);
      loss += eg.loss;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total.scale(inv);
    loss *= inv;
    if (!total.all_finite()) throw NumericError("non-finite gradient at iteration " + std::to_string(it));

    grad::adam_step(model.params(), total, model.optimizer(), config.adam);
    model.set_iteration(model.iteration() + 1);

    result.loss_trace.push_back(loss);
    if (config.trace_interval > 0 && it % config.trace_interval == 0) {
      result.sampled_trace.push_back(loss);
      model.loss_trace().push_back(loss);
    }
    if (callback) callback(it, model, loss);
  }
  return result;
}

}  // namespace diffgmm::model
