#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sagelink {

/// Dense row-major matrix of doubles. Zero-filled on construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  /// Takes ownership of values; values.size() must equal rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  const double& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data() + r * cols_, cols_};
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws std::invalid_argument naming both shapes when inner dims differ.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
/// Elementwise max(0, x).
Matrix relu(const Matrix& x);
bool is_finite(const Matrix& m);

/// Branches on the sign so the exponent never overflows; stable for all
/// finite inputs.
double sigmoid(double x);

}  // namespace sagelink
