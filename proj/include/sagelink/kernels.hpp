#pragma once

#include <cstddef>
#include <cstdint>

namespace sagelink::kernels {

/// Dense and sparse inner loops behind the numeric surface. Every entry has a
/// scalar reference implementation and may have an AVX2 variant. Variants are
/// required to produce bitwise-identical output: SIMD lanes run across
/// independent output elements only, so per-element summation order never
/// changes, and fused multiply-add is not used anywhere.
struct KernelTable {
  /// c[m x n] = a[m x k] * b[k x n], row-major, accumulation over k ascending.
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n);
  /// c += a * b, same shapes and order as matmul.
  void (*matmul_add)(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n);
  /// c[m x n] = transpose(a) * b with a[k x m], b[k x n].
  void (*matmul_at)(const double* a, const double* b, double* c, std::size_t k,
                    std::size_t m, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);
  /// out[i] = pre[i] > 0 ? grad[i] : 0.
  void (*relu_mask_backward)(const double* pre, const double* grad,
                             double* out, std::size_t n);
  /// y += x.
  void (*vadd)(double* y, const double* x, std::size_t n);
  /// y += a * x.
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// y = a * x.
  void (*scale_copy)(double a, const double* x, double* y, std::size_t n);
  /// Self-inclusive neighbourhood mean over a CSR adjacency:
  /// out[v] = (h[v] + sum of h[u] for u in adj(v)) / (deg(v) + 1).
  /// Summation follows CSR order; out must not alias h.
  void (*mean_aggregate)(const std::uint32_t* offsets,
                         const std::uint32_t* targets, const double* h,
                         double* out, std::size_t n, std::size_t d);
  /// Adjoint of mean_aggregate for a symmetric adjacency:
  /// out[u] = grad[u]/(deg(u)+1) + sum over v in adj(u) of grad[v]/(deg(v)+1).
  void (*mean_aggregate_backward)(const std::uint32_t* offsets,
                                  const std::uint32_t* targets,
                                  const double* grad, double* out,
                                  std::size_t n, std::size_t d);
  /// One bias-corrected Adam update over a flat parameter block. bias1 and
  /// bias2 are 1 - beta1^t and 1 - beta2^t, precomputed by the caller.
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
};

enum class Backend { scalar, avx2 };

const KernelTable& scalar_table();
/// nullptr when this build or CPU lacks AVX2.
const KernelTable* avx2_table();

/// Active table used by all library code. Defaults to AVX2 when available;
/// the SAGELINK_KERNELS environment variable ("scalar" or "avx2") overrides.
const KernelTable& active();
Backend active_backend();
/// Throws std::invalid_argument if the backend is unavailable.
void set_backend(Backend backend);

}  // namespace sagelink::kernels
