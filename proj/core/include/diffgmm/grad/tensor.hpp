#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace diffgmm::grad {

struct Shape {
  std::size_t channels = 1;
  std::size_t length = 0;

  std::size_t size() const noexcept { return channels * length; }
  bool operator==(const Shape&) const = default;
};

/// Channel-major [channels, length] array of doubles.
class Tensor1D {
 public:
  Tensor1D() = default;
  explicit Tensor1D(Shape shape);
  Tensor1D(Shape shape, std::vector<double> values);

  static Tensor1D from_signal(std::span<const double> samples);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t length() const noexcept { return shape_.length; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& at(std::size_t c, std::size_t t) { return values_[c * shape_.length + t]; }
  double at(std::size_t c, std::size_t t) const { return values_[c * shape_.length + t]; }

  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(values_).subspan(c * shape_.length, shape_.length);
  }

  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace diffgmm::grad
