#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dvfy::nn {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of reals. Value type; copying copies the storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0.0);
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<Real> data() noexcept { return values_; }
  std::span<const Real> data() const noexcept { return values_; }
  const std::vector<Real>& values() const noexcept { return values_; }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }

  // Row-major 2-D access for [rows x cols] tensors.
  Real& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  Real at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  /// Same storage, new extents. Throws kShape when the element counts differ.
  Tensor reshaped(Shape shape) const;
  void fill(Real v);
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

/// Trainable array plus its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace dvfy::nn
