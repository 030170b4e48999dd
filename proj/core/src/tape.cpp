#include "diffgmm/grad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "conv_kernels.hpp"
#include "diffgmm/errors.hpp"

namespace diffgmm::grad {
namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    throw_shape(std::string(op) + ": shape mismatch (" + std::to_string(a.channels) + "x" +
                std::to_string(a.length) + " vs " + std::to_string(b.channels) + "x" +
                std::to_string(b.length) + ")");
  }
}

// Per-sample log-density terms of a mixture, without the log-weight.
struct MixtureTerms {
  std::vector<double> log_weights;
  std::vector<double> log_norm;  // -0.5 ln(2 pi v_k)
};

MixtureTerms mixture_terms(std::span<const double> w, std::span<const double> v) {
  MixtureTerms t;
  t.log_weights.resize(w.size());
  t.log_norm.resize(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    t.log_weights[k] = w[k] > 0.0 ? std::log(w[k]) : -std::numeric_limits<double>::infinity();
    t.log_norm[k] = -0.5 * std::log(2.0 * std::numbers::pi * v[k]);
  }
  return t;
}

}  // namespace

std::size_t ConvSpec::output_length(std::size_t input_length) const {
  const std::size_t padded = input_length + 2 * padding;
  if (stride == 0 || kernel == 0 || kernel > padded) return 0;
  return (padded - kernel) / stride + 1;
}

Var Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

const TapeNode& Tape::at(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw_contract("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const TapeNode& Tape::node(Var v) const { return at(v); }

std::span<const double> Tape::values_of(const TapeNode& n) const {
  return n.borrowed != nullptr ? std::span<const double>(*n.borrowed) : std::span<const double>(n.value);
}

std::span<const double> Tape::value(Var v) const { return values_of(at(v)); }

Shape Tape::shape(Var v) const { return at(v).shape; }

double Tape::scalar_value(Var v) const {
  const auto& n = at(v);
  if (n.shape.size() != 1) throw_contract("scalar_value on a non-scalar node");
  return values_of(n)[0];
}

Var Tape::constant(Tensor1D t) {
  TapeNode n;
  n.kind = OpKind::constant;
  n.shape = t.shape();
  n.value = std::move(t.storage());
  return push(std::move(n));
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  return constant(Tensor1D(shape, std::move(values)));
}

Var Tape::param(const ParamStore& params, std::size_t index, Shape shape) {
  if (index >= params.size()) throw_contract("parameter index out of range");
  if (shape.size() != params[index].size()) {
    throw_shape("parameter " + params[index].name + " viewed with a mismatched shape");
  }
  TapeNode n;
  n.kind = OpKind::param;
  n.shape = shape;
  n.borrowed = &params[index].values;
  n.param_index = index;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& params, std::size_t index) {
  if (index >= params.size()) throw_contract("parameter index out of range");
  return param(params, index, Shape{params[index].size(), 1});
}

Var Tape::conv1d(Var x, Var weights, std::optional<Var> bias, const ConvSpec& spec) {
  const Shape xs = at(x).shape;
  if (spec.stride == 0) throw_contract("conv1d: stride must be positive");
  if (spec.kernel == 0 || spec.out_channels == 0) throw_contract("conv1d: empty kernel");
  if (spec.kernel > xs.length + 2 * spec.padding) throw_shape("conv1d: kernel longer than padded input");
  if (at(weights).shape.size() != spec.out_channels * xs.channels * spec.kernel) {
    throw_shape("conv1d: weight count must be out_channels x in_channels x kernel");
  }
  if (bias && at(*bias).shape.size() != spec.out_channels) {
    throw_shape("conv1d: bias count must equal out_channels");
  }
  TapeNode n;
  n.kind = OpKind::conv1d;
  n.inputs = {x.id, weights.id, bias ? bias->id : -1};
  n.conv = spec;
  n.shape = Shape{spec.out_channels, spec.output_length(xs.length)};
  n.value.resize(n.shape.size());
  kernels::conv1d_forward(value(x).data(), xs.channels, xs.length, value(weights).data(),
                          bias ? value(*bias).data() : nullptr, spec, n.value.data());
  return push(std::move(n));
}

Var Tape::upsample_linear(Var x, std::size_t factor) {
  const Shape xs = at(x).shape;
  if (factor == 0) throw_contract("upsample_linear: factor must be positive");
  if (xs.length == 0) throw_contract("upsample_linear: empty input");
  TapeNode n;
  n.kind = OpKind::upsample_linear;
  n.inputs = {x.id, -1, -1};
  n.factor = factor;
  n.shape = Shape{xs.channels, xs.length * factor};
  n.value.resize(n.shape.size());
  const auto in = value(x);
  const double inv = 1.0 / static_cast<double>(factor);
  for (std::size_t c = 0; c < xs.channels; ++c) {
    const double* src = in.data() + c * xs.length;
    double* dst = n.value.data() + c * n.shape.length;
    for (std::size_t t = 0; t < xs.length; ++t) {
      const double a = src[t];
      const double b = t + 1 < xs.length ? src[t + 1] : a;
      for (std::size_t s = 0; s < factor; ++s) {
        dst[t * factor + s] = a + (b - a) * (static_cast<double>(s) * inv);
      }
    }
  }
  return push(std::move(n));
}

Var Tape::linear(Var x, Var weights, std::optional<Var> bias) {
  const std::size_t in_dim = at(x).shape.size();
  const Shape ws = at(weights).shape;
  if (ws.length != in_dim) throw_shape("linear: weight columns must equal flattened input size");
  const std::size_t out_dim = ws.channels;
  if (bias && at(*bias).shape.size() != out_dim) throw_shape("linear: bias size must equal output size");
  TapeNode n;
  n.kind = OpKind::linear;
  n.inputs = {x.id, weights.id, bias ? bias->id : -1};
  n.shape = Shape{out_dim, 1};
  n.value.resize(out_dim);
  const auto xv = value(x);
  const auto wv = value(weights);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double acc = bias ? value(*bias)[o] : 0.0;
    const double* row = wv.data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * xv[i];
    n.value[o] = acc;
  }
  return push(std::move(n));
}

namespace {

template <typename F>
TapeNode unary_node(OpKind kind, Var x, Shape shape, std::span<const double> in, F f) {
  TapeNode n;
  n.kind = kind;
  n.inputs = {x.id, -1, -1};
  n.shape = shape;
  n.value.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) n.value[i] = f(in[i]);
  return n;
}

}  // namespace

Var Tape::relu(Var x) {
  return push(unary_node(OpKind::relu, x, at(x).shape, value(x), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var Tape::tanh(Var x) {
  return push(unary_node(OpKind::tanh, x, at(x).shape, value(x), [](double v) { return std::tanh(v); }));
}

Var Tape::exp(Var x) {
  return push(unary_node(OpKind::exp, x, at(x).shape, value(x), [](double v) { return std::exp(v); }));
}

Var Tape::square(Var x) {
  return push(unary_node(OpKind::square, x, at(x).shape, value(x), [](double v) { return v * v; }));
}

Var Tape::abs(Var x) {
  return push(unary_node(OpKind::abs, x, at(x).shape, value(x), [](double v) { return std::abs(v); }));
}

Var Tape::scale(Var x, double factor) {
  auto n = unary_node(OpKind::scale, x, at(x).shape, value(x), [factor](double v) { return v * factor; });
  n.scalar = factor;
  return push(std::move(n));
}

Var Tape::add_scalar(Var x, double offset) {
  auto n = unary_node(OpKind::add_scalar, x, at(x).shape, value(x), [offset](double v) { return v + offset; });
  n.scalar = offset;
  return push(std::move(n));
}

Var Tape::softmax(Var x) {
  const Shape s = at(x).shape;
  TapeNode n;
  n.kind = OpKind::softmax;
  n.inputs = {x.id, -1, -1};
  n.shape = s;
  n.value.resize(s.size());
  const auto in = value(x);
  for (std::size_t t = 0; t < s.length; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < s.channels; ++c) mx = std::max(mx, in[c * s.length + t]);
    double z = 0.0;
    for (std::size_t c = 0; c < s.channels; ++c) {
      const double e = std::exp(in[c * s.length + t] - mx);
      n.value[c * s.length + t] = e;
      z += e;
    }
    for (std::size_t c = 0; c < s.channels; ++c) n.value[c * s.length + t] /= z;
  }
  return push(std::move(n));
}

namespace {

template <typename F>
TapeNode binary_node(OpKind kind, Var a, Var b, Shape shape, std::span<const double> av,
                     std::span<const double> bv, F f) {
  TapeNode n;
  n.kind = kind;
  n.inputs = {a.id, b.id, -1};
  n.shape = shape;
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = f(av[i], bv[i]);
  return n;
}

}  // namespace

Var Tape::add(Var a, Var b) {
  require_same_shape(at(a).shape, at(b).shape, "add");
  return push(binary_node(OpKind::add, a, b, at(a).shape, value(a), value(b), std::plus<>()));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(at(a).shape, at(b).shape, "sub");
  return push(binary_node(OpKind::sub, a, b, at(a).shape, value(a), value(b), std::minus<>()));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(at(a).shape, at(b).shape, "mul");
  return push(binary_node(OpKind::mul, a, b, at(a).shape, value(a), value(b), std::multiplies<>()));
}

Var Tape::sum(Var x) {
  TapeNode n;
  n.kind = OpKind::sum;
  n.inputs = {x.id, -1, -1};
  n.shape = Shape{1, 1};
  double acc = 0.0;
  for (double v : value(x)) acc += v;
  n.value = {acc};
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  const std::size_t count = at(x).shape.size();
  if (count == 0) throw_contract("mean of an empty tensor");
  TapeNode n;
  n.kind = OpKind::mean;
  n.inputs = {x.id, -1, -1};
  n.shape = Shape{1, 1};
  double acc = 0.0;
  for (double v : value(x)) acc += v;
  n.value = {acc / static_cast<double>(count)};
  return push(std::move(n));
}

Var Tape::mean_time(Var x) {
  const Shape s = at(x).shape;
  if (s.length == 0) throw_contract("mean_time of an empty tensor");
  TapeNode n;
  n.kind = OpKind::mean_time;
  n.inputs = {x.id, -1, -1};
  n.shape = Shape{s.channels, 1};
  n.value.resize(s.channels);
  const auto in = value(x);
  for (std::size_t c = 0; c < s.channels; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.length; ++t) acc += in[c * s.length + t];
    n.value[c] = acc / static_cast<double>(s.length);
  }
  return push(std::move(n));
}

Var Tape::mixture_nll(Var weights, Var means, Var variances, std::span<const double> data) {
  const std::size_t K = at(weights).shape.size();
  if (K == 0) throw_contract("mixture_nll: empty mixture");
  if (at(means).shape.size() != K || at(variances).shape.size() != K) {
    throw_shape("mixture_nll: weights, means and variances must have equal size");
  }
  if (data.empty()) throw_contract("mixture_nll: empty data");
  const auto w = value(weights);
  const auto mu = value(means);
  const auto var = value(variances);
  for (double v : var) {
    if (!(v > 0.0)) throw_contract("mixture_nll: variances must be positive");
  }
  const auto terms = mixture_terms(w, var);
  std::vector<double> l(K);
  double total = 0.0;
  for (double x : data) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double d = x - mu[k];
      l[k] = terms.log_weights[k] + terms.log_norm[k] - 0.5 * d * d / var[k];
      mx = std::max(mx, l[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(l[k] - mx);
    total += mx + std::log(z);
  }
  TapeNode n;
  n.kind = OpKind::mixture_nll;
  n.inputs = {weights.id, means.id, variances.id};
  n.shape = Shape{1, 1};
  n.value = {-total / static_cast<double>(data.size())};
  n.saved.assign(data.begin(), data.end());
  return push(std::move(n));
}

std::vector<std::vector<double>> Tape::adjoints(Var loss) const {
  const auto& ln = at(loss);
  if (ln.shape.size() != 1) throw_contract("backward: loss must be a scalar");
  if (!std::isfinite(values_of(ln)[0])) throw NumericError("backward: loss is not finite");

  std::vector<std::vector<double>> adj(nodes_.size());
  auto grad_of = [&](int id) -> std::vector<double>& {
    auto& g = adj[static_cast<std::size_t>(id)];
    if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(id)].shape.size(), 0.0);
    return g;
  };
  adj[static_cast<std::size_t>(loss.id)] = {1.0};

  for (int i = loss.id; i >= 0; --i) {
    const auto& g = adj[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
    const int a = n.inputs[0];
    const int b = n.inputs[1];
    const int c = n.inputs[2];

    switch (n.kind) {
      case OpKind::constant:
      case OpKind::param:
        break;

      case OpKind::conv1d: {
        const TapeNode& xn = nodes_[static_cast<std::size_t>(a)];
        const TapeNode& wn = nodes_[static_cast<std::size_t>(b)];
        double* gx = grad_of(a).data();
        double* gw = grad_of(b).data();
        double* gb = c >= 0 ? grad_of(c).data() : nullptr;
        kernels::conv1d_backward(values_of(xn).data(), xn.shape.channels, xn.shape.length,
                                 values_of(wn).data(), n.conv, g.data(), gx, gw, gb);
        break;
      }

      case OpKind::upsample_linear: {
        const Shape xs = nodes_[static_cast<std::size_t>(a)].shape;
        auto& gx = grad_of(a);
        const std::size_t f = n.factor;
        const double inv = 1.0 / static_cast<double>(f);
        for (std::size_t ch = 0; ch < xs.channels; ++ch) {
          const double* go = g.data() + ch * n.shape.length;
          double* gi = gx.data() + ch * xs.length;
          for (std::size_t t = 0; t < xs.length; ++t) {
            for (std::size_t s = 0; s < f; ++s) {
              const double frac = static_cast<double>(s) * inv;
              const double v = go[t * f + s];
              if (t + 1 < xs.length) {
                gi[t] += (1.0 - frac) * v;
                gi[t + 1] += frac * v;
              } else {
                gi[t] += v;
              }
            }
          }
        }
        break;
      }

      case OpKind::linear: {
        const auto xv = values_of(nodes_[static_cast<std::size_t>(a)]);
        const auto wv = values_of(nodes_[static_cast<std::size_t>(b)]);
        const std::size_t in_dim = xv.size();
        auto& gx = grad_of(a);
        auto& gw = grad_of(b);
        for (std::size_t o = 0; o < n.shape.channels; ++o) {
          const double go = g[o];
          const double* row = wv.data() + o * in_dim;
          double* grow = gw.data() + o * in_dim;
          for (std::size_t k = 0; k < in_dim; ++k) {
            grow[k] += go * xv[k];
            gx[k] += go * row[k];
          }
        }
        if (c >= 0) {
          auto& gb = grad_of(c);
          for (std::size_t o = 0; o < n.shape.channels; ++o) gb[o] += g[o];
        }
        break;
      }

      case OpKind::relu: {
        const auto xv = values_of(nodes_[static_cast<std::size_t>(a)]);
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (xv[k] > 0.0) gx[k] += g[k];
        }
        break;
      }

      case OpKind::tanh: {
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
        break;
      }

      case OpKind::exp: {
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * n.value[k];
        break;
      }

      case OpKind::softmax: {
        auto& gx = grad_of(a);
        const Shape s = n.shape;
        for (std::size_t t = 0; t < s.length; ++t) {
          double dot = 0.0;
          for (std::size_t ch = 0; ch < s.channels; ++ch) {
            dot += g[ch * s.length + t] * n.value[ch * s.length + t];
          }
          for (std::size_t ch = 0; ch < s.channels; ++ch) {
            const std::size_t k = ch * s.length + t;
            gx[k] += n.value[k] * (g[k] - dot);
          }
        }
        break;
      }

      case OpKind::add: {
        auto& ga = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
        auto& gb = grad_of(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
        break;
      }

      case OpKind::sub: {
        auto& ga = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
        auto& gb = grad_of(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
        break;
      }

      case OpKind::mul: {
        const auto av = values_of(nodes_[static_cast<std::size_t>(a)]);
        const auto bv = values_of(nodes_[static_cast<std::size_t>(b)]);
        auto& ga = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * bv[k];
        auto& gb = grad_of(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * av[k];
        break;
      }

      case OpKind::scale: {
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * n.scalar;
        break;
      }

      case OpKind::add_scalar: {
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
        break;
      }

      case OpKind::sum: {
        auto& gx = grad_of(a);
        for (double& v : gx) v += g[0];
        break;
      }

      case OpKind::mean: {
        auto& gx = grad_of(a);
        const double share = g[0] / static_cast<double>(gx.size());
        for (double& v : gx) v += share;
        break;
      }

      case OpKind::mean_time: {
        const Shape xs = nodes_[static_cast<std::size_t>(a)].shape;
        auto& gx = grad_of(a);
        const double inv = 1.0 / static_cast<double>(xs.length);
        for (std::size_t ch = 0; ch < xs.channels; ++ch) {
          const double share = g[ch] * inv;
          for (std::size_t t = 0; t < xs.length; ++t) gx[ch * xs.length + t] += share;
        }
        break;
      }

      case OpKind::square: {
        const auto xv = values_of(nodes_[static_cast<std::size_t>(a)]);
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += 2.0 * xv[k] * g[k];
        break;
      }

      case OpKind::abs: {
        const auto xv = values_of(nodes_[static_cast<std::size_t>(a)]);
        auto& gx = grad_of(a);
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (xv[k] > 0.0) {
            gx[k] += g[k];
          } else if (xv[k] < 0.0) {
            gx[k] -= g[k];
          }
        }
        break;
      }

      case OpKind::mixture_nll: {
        const auto w = values_of(nodes_[static_cast<std::size_t>(a)]);
        const auto mu = values_of(nodes_[static_cast<std::size_t>(b)]);
        const auto var = values_of(nodes_[static_cast<std::size_t>(c)]);
        const std::size_t K = w.size();
        const auto terms = mixture_terms(w, var);
        auto& gw = grad_of(a);
        auto& gm = grad_of(b);
        auto& gv = grad_of(c);
        const double coef = -g[0] / static_cast<double>(n.saved.size());
        std::vector<double> lw(K);
        std::vector<double> l(K);
        for (double x : n.saved) {
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < K; ++k) {
            const double d = x - mu[k];
            lw[k] = terms.log_norm[k] - 0.5 * d * d / var[k];
            l[k] = terms.log_weights[k] + lw[k];
            mx = std::max(mx, l[k]);
          }
          double z = 0.0;
          for (std::size_t k = 0; k < K; ++k) z += std::exp(l[k] - mx);
          const double log_p = mx + std::log(z);
          for (std::size_t k = 0; k < K; ++k) {
            const double d = x - mu[k];
            const double r = std::exp(l[k] - log_p);
            gw[k] += coef * std::exp(lw[k] - log_p);
            gm[k] += coef * r * d / var[k];
            gv[k] += coef * r * 0.5 * (d * d / (var[k] * var[k]) - 1.0 / var[k]);
          }
        }
        break;
      }
    }
  }
  return adj;
}

Gradients Tape::backward(Var loss, const ParamStore& params) const {
  const auto adj = adjoints(loss);
  Gradients grads = Gradients::zeros_like(params);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TapeNode& n = nodes_[i];
    if (n.kind != OpKind::param || adj[i].empty()) continue;
    if (n.borrowed != &params[n.param_index].values) {
      throw_contract("backward: tape parameters belong to a different ParamStore");
    }
    auto& dst = grads.per_param[n.param_index];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += adj[i][k];
  }
  return grads;
}

}  // namespace diffgmm::grad
