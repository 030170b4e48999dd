#pragma once

#include <cstddef>

#include "diffgmm/grad/tape.hpp"

namespace diffgmm::grad::kernels {

// Writes out[c_out, L_out]. `bias` may be null.
void conv1d_forward(const double* in, std::size_t in_channels, std::size_t length,
                    const double* weights, const double* bias, const ConvSpec& spec, double* out);

// Accumulates into grad_in[c_in, L], grad_w and grad_b. Any output pointer may
// be null when that gradient is not needed.
void conv1d_backward(const double* in, std::size_t in_channels, std::size_t length,
                     const double* weights, const ConvSpec& spec, const double* grad_out,
                     double* grad_in, double* grad_w, double* grad_b);

}  // namespace diffgmm::grad::kernels
