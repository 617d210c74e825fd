// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "blin/kernels.hpp"

namespace blin::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + k));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + k + 4));
  }
  if (k + 4 <= n) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + k));
    k += 4;
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; k < n; ++k) s += x[k];
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd();
  __m256d a3 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 16 <= n; k += 16) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 4), _mm256_loadu_pd(y + k + 4), a1);
    a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 8), _mm256_loadu_pd(y + k + 8), a2);
    a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 12), _mm256_loadu_pd(y + k + 12), a3);
  }
  for (; k + 4 <= n; k += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), a0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
  for (; k < n; ++k) s += x[k] * y[k];
  return s;
}

void subtract_avx2(const double* x, double shift, double* out, std::size_t n) {
  const __m256d c = _mm256_set1_pd(shift);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(out + k, _mm256_sub_pd(_mm256_loadu_pd(x + k), c));
  }
  for (; k < n; ++k) out[k] = x[k] - shift;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{Isa::avx2, "avx2", &sum_avx2, &dot_avx2, &subtract_avx2};
  return t;
}

}  // namespace blin::kernels::detail
