#include "conv_kernels.hpp"

#include <Eigen/Core>
#include <algorithm>

namespace diffgmm::grad::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Columns of the im2col buffer processed per GEMM; bounds scratch memory for
// long inputs.
constexpr std::size_t kBlock = 2048;

bool is_pointwise(const ConvSpec& s) { return s.kernel == 1 && s.stride == 1 && s.padding == 0; }

// col(i*k + j, t) = in[i, (t0 + t)*stride + j - padding], zero outside [0, L).
void im2col(const double* in, std::size_t in_channels, std::size_t length, const ConvSpec& s,
            std::size_t t0, std::size_t nb, RowMat& col) {
  const auto L = static_cast<long long>(length);
  for (std::size_t i = 0; i < in_channels; ++i) {
    const double* src = in + i * length;
    for (std::size_t j = 0; j < s.kernel; ++j) {
      double* dst = col.data() + (i * s.kernel + j) * col.cols();
      const long long base = static_cast<long long>(t0 * s.stride + j) - static_cast<long long>(s.padding);
      if (s.stride == 1) {
        for (std::size_t t = 0; t < nb; ++t) {
          const long long p = base + static_cast<long long>(t);
          dst[t] = (p >= 0 && p < L) ? src[p] : 0.0;
        }
      } else {
        for (std::size_t t = 0; t < nb; ++t) {
          const long long p = base + static_cast<long long>(t * s.stride);
          dst[t] = (p >= 0 && p < L) ? src[p] : 0.0;
        }
      }
    }
  }
}

void col2im_add(const RowMat& dcol, std::size_t in_channels, std::size_t length, const ConvSpec& s,
                std::size_t t0, std::size_t nb, double* grad_in) {
  const auto L = static_cast<long long>(length);
  for (std::size_t i = 0; i < in_channels; ++i) {
    double* dst = grad_in + i * length;
    for (std::size_t j = 0; j < s.kernel; ++j) {
      const double* src = dcol.data() + (i * s.kernel + j) * dcol.cols();
      const long long base = static_cast<long long>(t0 * s.stride + j) - static_cast<long long>(s.padding);
      for (std::size_t t = 0; t < nb; ++t) {
        const long long p = base + static_cast<long long>(t * s.stride);
        if (p >= 0 && p < L) dst[p] += src[t];
      }
    }
  }
}

}  // namespace

void conv1d_forward(const double* in, std::size_t in_channels, std::size_t length,
                    const double* weights, const double* bias, const ConvSpec& spec, double* out) {
  const std::size_t c_out = spec.out_channels;
  const std::size_t rows = in_channels * spec.kernel;
  const std::size_t l_out = spec.output_length(length);
  Eigen::Map<const RowMat> w(weights, static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(rows));

  if (is_pointwise(spec)) {
    Eigen::Map<const RowMat> x(in, static_cast<Eigen::Index>(in_channels), static_cast<Eigen::Index>(length));
    Eigen::Map<RowMat> y(out, static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(l_out));
    y.noalias() = w * x;
  } else {
    RowMat col(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(std::min(kBlock, l_out)));
    for (std::size_t t0 = 0; t0 < l_out; t0 += kBlock) {
      const std::size_t nb = std::min(kBlock, l_out - t0);
      if (static_cast<std::size_t>(col.cols()) != nb) col.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(nb));
      im2col(in, in_channels, length, spec, t0, nb, col);
      StridedMap y(out + t0, static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(nb),
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(l_out)));
      y.noalias() = w * col;
    }
  }
  if (bias != nullptr) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* row = out + o * l_out;
      const double b = bias[o];
      for (std::size_t t = 0; t < l_out; ++t) row[t] += b;
    }
  }
}

void conv1d_backward(const double* in, std::size_t in_channels, std::size_t length,
                     const double* weights, const ConvSpec& spec, const double* grad_out,
                     double* grad_in, double* grad_w, double* grad_b) {
  const std::size_t c_out = spec.out_channels;
  const std::size_t rows = in_channels * spec.kernel;
  const std::size_t l_out = spec.output_length(length);
  const auto ec_out = static_cast<Eigen::Index>(c_out);
  const auto erows = static_cast<Eigen::Index>(rows);
  Eigen::Map<const RowMat> w(weights, ec_out, erows);

  if (grad_b != nullptr) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const double* g = grad_out + o * l_out;
      double acc = 0.0;
      for (std::size_t t = 0; t < l_out; ++t) acc += g[t];
      grad_b[o] += acc;
    }
  }

  if (is_pointwise(spec)) {
    const auto el = static_cast<Eigen::Index>(length);
    Eigen::Map<const RowMat> x(in, static_cast<Eigen::Index>(in_channels), el);
    Eigen::Map<const RowMat> g(grad_out, ec_out, el);
    if (grad_w != nullptr) {
      Eigen::Map<RowMat> gw(grad_w, ec_out, erows);
      gw.noalias() += g * x.transpose();
    }
    if (grad_in != nullptr) {
      Eigen::Map<RowMat> gx(grad_in, static_cast<Eigen::Index>(in_channels), el);
      gx.noalias() += w.transpose() * g;
    }
    return;
  }

  RowMat col(erows, static_cast<Eigen::Index>(std::min(kBlock, l_out)));
  RowMat dcol;
  for (std::size_t t0 = 0; t0 < l_out; t0 += kBlock) {
    const std::size_t nb = std::min(kBlock, l_out - t0);
    const auto enb = static_cast<Eigen::Index>(nb);
    ConstStridedMap g(grad_out + t0, ec_out, enb, Eigen::OuterStride<>(static_cast<Eigen::Index>(l_out)));
    if (grad_w != nullptr) {
      if (col.cols() != enb) col.resize(erows, enb);
      im2col(in, in_channels, length, spec, t0, nb, col);
      Eigen::Map<RowMat> gw(grad_w, ec_out, erows);
      gw.noalias() += g * col.transpose();
    }
    if (grad_in != nullptr) {
      dcol.noalias() = w.transpose() * g;
      col2im_add(dcol, in_channels, length, spec, t0, nb, grad_in);
    }
  }
}

}  // namespace diffgmm::grad::kernels
