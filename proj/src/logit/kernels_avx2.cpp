// Compiled with -mavx2. Only reachable after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <limits>

#include "cdd/logit/kernels.hpp"

namespace cdd::logit::kernels {
namespace {

double max_value(const double* x, std::size_t n) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  __m256d acc = _mm256_set1_pd(kNegInf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double m = kNegInf;
  for (double v : lane) {
    if (v > m) m = v;
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m + 0.0;
}

double shifted_exp_sum(const double* x, std::size_t n, double shift) {
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  alignas(32) double buf[4];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_store_pd(buf, _mm256_sub_pd(_mm256_loadu_pd(x + i), s));
    for (double& v : buf) v = std::exp(v);
    acc = _mm256_add_pd(acc, _mm256_load_pd(buf));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (; i < n; ++i) lane[i % 4] += std::exp(x[i] - shift);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void subtract(const double* x, std::size_t n, double c, double* out) {
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), cv));
  }
  for (; i < n; ++i) out[i] = x[i] - c;
}

void contrastive(const double* ft, const double* base, std::size_t n,
                 double beta, double* out) {
  const double gain = 1.0 + beta;
  const __m256d g = _mm256_set1_pd(gain);
  const __m256d b = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d lhs = _mm256_mul_pd(g, _mm256_loadu_pd(ft + i));
    const __m256d rhs = _mm256_mul_pd(b, _mm256_loadu_pd(base + i));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(lhs, rhs));
  }
  for (; i < n; ++i) {
    const double lhs = gain * ft[i];
    const double rhs = beta * base[i];
    out[i] = lhs - rhs;
  }
}

std::size_t threshold_mask(const double* p, std::size_t n, double threshold,
                           std::uint8_t* keep) {
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const int bits =
        _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(p + i), t, _CMP_GE_OQ));
    for (int j = 0; j < 4; ++j) keep[i + j] = (bits >> j) & 1;
    count += static_cast<std::size_t>(__builtin_popcount(bits));
  }
  for (; i < n; ++i) {
    keep[i] = p[i] >= threshold ? 1 : 0;
    count += keep[i];
  }
  return count;
}

void mask_scale(const double* scores, const std::uint8_t* keep, std::size_t n,
                double temperature, double* out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const __m256d t = _mm256_set1_pd(temperature);
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::int32_t packed;
    __builtin_memcpy(&packed, keep + i, 4);
    const __m256i k64 = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
    const __m256d drop = _mm256_castsi256_pd(_mm256_cmpeq_epi64(k64, zero));
    const __m256d scaled = _mm256_div_pd(_mm256_loadu_pd(scores + i), t);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(scaled, ninf, drop));
  }
  for (; i < n; ++i) out[i] = keep[i] ? scores[i] / temperature : kNegInf;
}

void exp_shift(const double* x, std::size_t n, double shift, double* out) {
  const __m256d s = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), s));
    for (std::size_t j = i; j < i + 4; ++j) out[j] = std::exp(out[j]);
  }
  for (; i < n; ++i) out[i] = std::exp(x[i] - shift);
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2",     max_value,   shifted_exp_sum,
                                 subtract,   contrastive, threshold_mask,
                                 mask_scale, exp_shift};
  return table;
}

}  // namespace cdd::logit::kernels
