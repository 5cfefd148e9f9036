#include "sagelink/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sagelink/kernels.hpp"

namespace sagelink {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols)
    throw std::invalid_argument("matrix value count " +
                                std::to_string(data_.size()) +
                                " does not fill " + shape_of(*this));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: dimension mismatch " + shape_of(a) +
                                " * " + shape_of(b));
  Matrix c(a.rows(), b.cols());
  kernels::active().matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                           b.cols());
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  kernels::active().relu(x.data(), y.data(), x.size());
  return y;
}

bool is_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i])) return false;
  return true;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace sagelink
