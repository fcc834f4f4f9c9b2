#include "nluaug/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {
  cacheMatrixView();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    std::ostringstream os;
    os << "tensor data length " << data_.size() << " does not match shape product "
       << product(shape_);
    throw ShapeError(os.str());
  }
  cacheMatrixView();
}

void Tensor::cacheMatrixView() {
  cols_ = shape_.empty() ? 1 : shape_.back();
  rows_ = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) rows_ *= shape_[i];
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shapeString(*this));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::allFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shapeString(const Tensor& t) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < t.shape().size(); ++i) os << (i ? "x" : "") << t.shape()[i];
  os << ']';
  return os.str();
}

}  // namespace nluaug
