#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "diffgmm/grad/params.hpp"
#include "diffgmm/grad/tensor.hpp"

namespace diffgmm::grad {

enum class OpKind : std::uint8_t {
  constant,
  param,
  conv1d,
  upsample_linear,
  linear,
  relu,
  tanh,
  exp,
  softmax,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  sum,
  mean,
  mean_time,
  square,
  abs,
  mixture_nll,
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

struct ConvSpec {
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  /// floor((L + 2*padding - kernel) / stride) + 1
  std::size_t output_length(std::size_t input_length) const;
};

struct TapeNode {
  OpKind kind = OpKind::constant;
  std::array<int, 3> inputs{-1, -1, -1};
  Shape shape;
  std::vector<double> value;
  // Borrowed values for parameter leaves; the ParamStore must outlive the tape.
  const std::vector<double>* borrowed = nullptr;
  std::size_t param_index = 0;
  ConvSpec conv;
  std::size_t factor = 1;
  double scalar = 0.0;
  std::vector<double> saved;
};

/// Define-by-run reverse-mode tape over channel-major 1D arrays. Nodes are
/// appended in evaluation order, so the node list is already topologically
/// sorted. A tape is single-threaded; independent tapes may run concurrently
/// against a shared, unmodified ParamStore.
class Tape {
 public:
  Var constant(Tensor1D t);
  Var constant(Shape shape, std::vector<double> values);

  /// Leaf bound to params[index]; `shape` must cover the parameter's values.
  Var param(const ParamStore& params, std::size_t index, Shape shape);
  /// Leaf bound to params[index] viewed as (size, 1).
  Var param(const ParamStore& params, std::size_t index);

  /// Cross-correlation. Weights hold out_channels x in_channels x kernel values
  /// (any shape with that count); bias holds out_channels values when present.
  Var conv1d(Var x, Var weights, std::optional<Var> bias, const ConvSpec& spec);

  /// Linear interpolation between neighbours; the last sample is replicated.
  Var upsample_linear(Var x, std::size_t factor);

  /// Affine map of the flattened input: (m x n) weights, m biases -> shape (m, 1).
  Var linear(Var x, Var weights, std::optional<Var> bias);

  Var relu(Var x);
  Var tanh(Var x);
  Var exp(Var x);

  /// Softmax across channels independently at every time step.
  Var softmax(Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double factor);
  Var add_scalar(Var x, double offset);

  Var sum(Var x);
  Var mean(Var x);
  /// Per-channel mean over time: (C, L) -> (C, 1).
  Var mean_time(Var x);
  Var square(Var x);
  Var abs(Var x);

  /// -(1/N) sum_n ln sum_k w_k N(data_n | mu_k, var_k), evaluated with
  /// log-sum-exp. weights/means/variances are (K, 1) nodes.
  Var mixture_nll(Var weights, Var means, Var variances, std::span<const double> data);

  std::span<const double> value(Var v) const;
  Shape shape(Var v) const;
  double scalar_value(Var v) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const TapeNode& node(Var v) const;

  /// Gradient of the scalar `loss` with respect to every parameter in `params`.
  /// Parameters not reached from `loss` get zero gradients.
  Gradients backward(Var loss, const ParamStore& params) const;

  /// Adjoint of every node (debug/testing aid).
  std::vector<std::vector<double>> adjoints(Var loss) const;

 private:
  Var push(TapeNode node);
  const TapeNode& at(Var v) const;
  std::span<const double> values_of(const TapeNode& n) const;

  std::vector<TapeNode> nodes_;
};

}  // namespace diffgmm::grad
