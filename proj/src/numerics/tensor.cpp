#include "dvfy/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "dvfy/error.hpp"

namespace dvfy {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kChecksum: return "checksum error";
    case ErrorKind::kVersion: return "version error";
  }
  return "error";
}

}  // namespace dvfy

namespace dvfy::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) require(extent > 0, ErrorKind::kShape, "zero extent in " + shape_string(shape_));
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
  require(shape_size(shape_) == values_.size(), ErrorKind::kShape,
          "shape " + shape_string(shape_) + " does not hold " + std::to_string(values_.size()) + " values");
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == values_.size(), ErrorKind::kShape,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace dvfy::nn
