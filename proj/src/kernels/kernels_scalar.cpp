#include <algorithm>
#include <cmath>

#include "sagelink/kernels.hpp"

// Reference backend. The loop structures here define the summation order the
// AVX2 backend must reproduce exactly: matrix products accumulate over the
// shared dimension in ascending order, aggregation follows CSR order.

namespace sagelink::kernels {
namespace {

void matmul_add_scalar(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a[i * k + l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ail * brow[j];
    }
  }
}

void matmul_scalar(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  matmul_add_scalar(a, b, c, m, k, n);
}

void matmul_at_scalar(const double* a, const double* b, double* c,
                      std::size_t k, std::size_t m, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ali = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ali * brow[j];
    }
  }
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_backward_scalar(const double* pre, const double* grad,
                               double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void vadd_scalar(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_copy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

void mean_aggregate_scalar(const std::uint32_t* offsets,
                           const std::uint32_t* targets, const double* h,
                           double* out, std::size_t n, std::size_t d) {
  for (std::size_t v = 0; v < n; ++v) {
    const std::uint32_t beg = offsets[v];
    const std::uint32_t end = offsets[v + 1];
    const double count = static_cast<double>(end - beg + 1);
    double* orow = out + v * d;
    const double* self = h + v * d;
    for (std::size_t c = 0; c < d; ++c) orow[c] = self[c];
    for (std::uint32_t idx = beg; idx < end; ++idx) {
      const double* nrow = h + static_cast<std::size_t>(targets[idx]) * d;
      for (std::size_t c = 0; c < d; ++c) orow[c] += nrow[c];
    }
    for (std::size_t c = 0; c < d; ++c) orow[c] /= count;
  }
}

void mean_aggregate_backward_scalar(const std::uint32_t* offsets,
                                    const std::uint32_t* targets,
                                    const double* grad, double* out,
                                    std::size_t n, std::size_t d) {
  for (std::size_t u = 0; u < n; ++u) {
    const std::uint32_t beg = offsets[u];
    const std::uint32_t end = offsets[u + 1];
    const double inv_u = 1.0 / static_cast<double>(end - beg + 1);
    double* orow = out + u * d;
    const double* gself = grad + u * d;
    for (std::size_t c = 0; c < d; ++c) orow[c] = gself[c] * inv_u;
    for (std::uint32_t idx = beg; idx < end; ++idx) {
      const std::size_t v = targets[idx];
      const double inv_v =
          1.0 / static_cast<double>(offsets[v + 1] - offsets[v] + 1);
      const double* grow = grad + v * d;
      for (std::size_t c = 0; c < d; ++c) orow[c] += grow[c] * inv_v;
    }
  }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias1, double bias2) {
  const double omb1 = 1.0 - beta1;
  const double omb2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + omb1 * g[i];
    v[i] = beta2 * v[i] + omb2 * (g[i] * g[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] = p[i] - lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      matmul_scalar,
      matmul_add_scalar,
      matmul_at_scalar,
      relu_scalar,
      relu_mask_backward_scalar,
      vadd_scalar,
      axpy_scalar,
      scale_copy_scalar,
      mean_aggregate_scalar,
      mean_aggregate_backward_scalar,
      adam_update_scalar,
  };
  return table;
}

}  // namespace sagelink::kernels
