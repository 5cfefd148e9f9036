#include "sagelink/kernels.hpp"

// AVX2 backend. Compiled with -mavx2 in its own translation unit; nothing
// here runs unless dispatch confirmed CPU support. Lanes always map to
// independent output elements and products are combined with separate
// multiply and add (no FMA), which keeps every result bitwise equal to the
// scalar backend. Tail loops repeat the scalar expressions verbatim.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace sagelink::kernels {
namespace {

void matmul_add_avx2(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a[i * k + l];
      const __m256d va = _mm256_set1_pd(ail);
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n4; j += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(brow + j));
        const __m256d sum = _mm256_add_pd(_mm256_loadu_pd(crow + j), prod);
        _mm256_storeu_pd(crow + j, sum);
      }
      for (std::size_t j = n4; j < n; ++j) crow[j] += ail * brow[j];
    }
  }
}

void matmul_avx2(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  matmul_add_avx2(a, b, c, m, k, n);
}

void matmul_at_avx2(const double* a, const double* b, double* c, std::size_t k,
                    std::size_t m, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  const std::size_t n4 = n - n % 4;
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ali = arow[i];
      const __m256d va = _mm256_set1_pd(ali);
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n4; j += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(brow + j));
        const __m256d sum = _mm256_add_pd(_mm256_loadu_pd(crow + j), prod);
        _mm256_storeu_pd(crow + j, sum);
      }
      for (std::size_t j = n4; j < n; ++j) crow[j] += ali * brow[j];
    }
  }
}

void relu_avx2(const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (std::size_t i = n4; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_backward_avx2(const double* pre, const double* grad,
                             double* out, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(grad + i)));
  }
  for (std::size_t i = n4; i < n; ++i)
    out[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void vadd_avx2(double* y, const double* x, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d sum =
        _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, sum);
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += x[i];
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  const __m256d va = _mm256_set1_pd(a);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += a * x[i];
}

void scale_copy_avx2(double a, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n - n % 4;
  const __m256d va = _mm256_set1_pd(a);
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (std::size_t i = n4; i < n; ++i) y[i] = a * x[i];
}

void mean_aggregate_avx2(const std::uint32_t* offsets,
                         const std::uint32_t* targets, const double* h,
                         double* out, std::size_t n, std::size_t d) {
  const std::size_t d4 = d - d % 4;
  for (std::size_t v = 0; v < n; ++v) {
    const std::uint32_t beg = offsets[v];
    const std::uint32_t end = offsets[v + 1];
    const double count = static_cast<double>(end - beg + 1);
    double* orow = out + v * d;
    const double* self = h + v * d;
    for (std::size_t c = 0; c < d; ++c) orow[c] = self[c];
    for (std::uint32_t idx = beg; idx < end; ++idx) {
      const double* nrow = h + static_cast<std::size_t>(targets[idx]) * d;
      for (std::size_t c = 0; c < d4; c += 4) {
        const __m256d sum =
            _mm256_add_pd(_mm256_loadu_pd(orow + c), _mm256_loadu_pd(nrow + c));
        _mm256_storeu_pd(orow + c, sum);
      }
      for (std::size_t c = d4; c < d; ++c) orow[c] += nrow[c];
    }
    const __m256d vcount = _mm256_set1_pd(count);
    for (std::size_t c = 0; c < d4; c += 4)
      _mm256_storeu_pd(orow + c, _mm256_div_pd(_mm256_loadu_pd(orow + c), vcount));
    for (std::size_t c = d4; c < d; ++c) orow[c] /= count;
  }
}

void mean_aggregate_backward_avx2(const std::uint32_t* offsets,
                                  const std::uint32_t* targets,
                                  const double* grad, double* out,
                                  std::size_t n, std::size_t d) {
  const std::size_t d4 = d - d % 4;
  for (std::size_t u = 0; u < n; ++u) {
    const std::uint32_t beg = offsets[u];
    const std::uint32_t end = offsets[u + 1];
    const double inv_u = 1.0 / static_cast<double>(end - beg + 1);
    double* orow = out + u * d;
    const double* gself = grad + u * d;
    {
      const __m256d vinv = _mm256_set1_pd(inv_u);
      for (std::size_t c = 0; c < d4; c += 4)
        _mm256_storeu_pd(orow + c,
                         _mm256_mul_pd(vinv, _mm256_loadu_pd(gself + c)));
      for (std::size_t c = d4; c < d; ++c) orow[c] = gself[c] * inv_u;
    }
    for (std::uint32_t idx = beg; idx < end; ++idx) {
      const std::size_t v = targets[idx];
      const double inv_v =
          1.0 / static_cast<double>(offsets[v + 1] - offsets[v] + 1);
      const __m256d vinv = _mm256_set1_pd(inv_v);
      const double* grow = grad + v * d;
      for (std::size_t c = 0; c < d4; c += 4) {
        const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(grow + c), vinv);
        _mm256_storeu_pd(orow + c,
                         _mm256_add_pd(_mm256_loadu_pd(orow + c), prod));
      }
      for (std::size_t c = d4; c < d; ++c) orow[c] += grow[c] * inv_v;
    }
  }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
  const double omb1 = 1.0 - beta1;
  const double omb2 = 1.0 - beta2;
  const std::size_t n4 = n - n % 4;
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vomb1 = _mm256_set1_pd(omb1);
  const __m256d vomb2 = _mm256_set1_pd(omb2);
  const __m256d vbias1 = _mm256_set1_pd(bias1);
  const __m256d vbias2 = _mm256_set1_pd(bias2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(vomb1, vg));
    const __m256d vg2 = _mm256_mul_pd(vg, vg);
    const __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vomb2, vg2));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(vm, vbias1);
    const __m256d vhat = _mm256_div_pd(vv, vbias2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (std::size_t i = n4; i < n; ++i) {
    m[i] = beta1 * m[i] + omb1 * g[i];
    v[i] = beta2 * v[i] + omb2 * (g[i] * g[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] = p[i] - lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

namespace detail {

const KernelTable* avx2_table_build() {
  static const KernelTable table = {
      matmul_avx2,
      matmul_add_avx2,
      matmul_at_avx2,
      relu_avx2,
      relu_mask_backward_avx2,
      vadd_avx2,
      axpy_avx2,
      scale_copy_avx2,
      mean_aggregate_avx2,
      mean_aggregate_backward_avx2,
      adam_update_avx2,
  };
  return &table;
}

}  // namespace detail
}  // namespace sagelink::kernels

#else

namespace sagelink::kernels::detail {

const KernelTable* avx2_table_build() { return nullptr; }

}  // namespace sagelink::kernels::detail

#endif
