#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace nluaug {

/// Dense row-major array of doubles. Ops treat rank 0 as 1x1 and rank 1 as a
/// single row, so every tensor also has a matrix view (rows() x cols()).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }
  static Tensor row(std::vector<double> data) {
    const auto n = data.size();
    return Tensor({1, n}, std::move(data));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::span<double> rowSpan(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> rowSpan(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double item() const;
  void fill(double v);
  bool sameShape(const Tensor& other) const { return rows() == other.rows() && cols() == other.cols(); }
  bool allFinite() const;

 private:
  void cacheMatrixView();

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::size_t rows_ = 1;
  std::size_t cols_ = 1;
};

std::string shapeString(const Tensor& t);

}  // namespace nluaug
