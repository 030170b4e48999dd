#include "diffgmm/grad/tensor.hpp"

#include <cmath>

#include "diffgmm/errors.hpp"

namespace diffgmm::grad {

Tensor1D::Tensor1D(Shape shape) : shape_(shape), values_(shape.size(), 0.0) {}

Tensor1D::Tensor1D(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw_shape("tensor value count does not match channels x length");
  }
}

Tensor1D Tensor1D::from_signal(std::span<const double> samples) {
  return Tensor1D(Shape{1, samples.size()}, std::vector<double>(samples.begin(), samples.end()));
}

bool Tensor1D::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace diffgmm::grad
