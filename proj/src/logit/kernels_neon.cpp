// aarch64 only; the build adds this file when targeting arm64.
#include <arm_neon.h>

#include <cmath>
#include <limits>

#include "cdd/logit/kernels.hpp"

namespace cdd::logit::kernels {
namespace {

// NEON holds two doubles per register, so two registers cover the four
// canonical accumulation lanes.

double max_value(const double* x, std::size_t n) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  float64x2_t lo = vdupq_n_f64(kNegInf);
  float64x2_t hi = lo;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vmaxq_f64(lo, vld1q_f64(x + i));
    hi = vmaxq_f64(hi, vld1q_f64(x + i + 2));
  }
  double m = vmaxvq_f64(vmaxq_f64(lo, hi));
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m + 0.0;
}

double shifted_exp_sum(const double* x, std::size_t n, double shift) {
  const float64x2_t s = vdupq_n_f64(shift);
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = lo;
  double buf[4];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(buf, vsubq_f64(vld1q_f64(x + i), s));
    vst1q_f64(buf + 2, vsubq_f64(vld1q_f64(x + i + 2), s));
    for (double& v : buf) v = std::exp(v);
    lo = vaddq_f64(lo, vld1q_f64(buf));
    hi = vaddq_f64(hi, vld1q_f64(buf + 2));
  }
  double lane[4];
  vst1q_f64(lane, lo);
  vst1q_f64(lane + 2, hi);
  for (; i < n; ++i) lane[i % 4] += std::exp(x[i] - shift);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void subtract(const double* x, std::size_t n, double c, double* out) {
  const float64x2_t cv = vdupq_n_f64(c);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), cv));
  for (; i < n; ++i) out[i] = x[i] - c;
}

void contrastive(const double* ft, const double* base, std::size_t n,
                 double beta, double* out) {
  const double gain = 1.0 + beta;
  const float64x2_t g = vdupq_n_f64(gain);
  const float64x2_t b = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t lhs = vmulq_f64(g, vld1q_f64(ft + i));
    const float64x2_t rhs = vmulq_f64(b, vld1q_f64(base + i));
    vst1q_f64(out + i, vsubq_f64(lhs, rhs));
  }
  for (; i < n; ++i) {
    const double lhs = gain * ft[i];
    const double rhs = beta * base[i];
    out[i] = lhs - rhs;
  }
}

std::size_t threshold_mask(const double* p, std::size_t n, double threshold,
                           std::uint8_t* keep) {
  const float64x2_t t = vdupq_n_f64(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t ge = vcgeq_f64(vld1q_f64(p + i), t);
    keep[i] = vgetq_lane_u64(ge, 0) ? 1 : 0;
    keep[i + 1] = vgetq_lane_u64(ge, 1) ? 1 : 0;
    count += keep[i] + keep[i + 1];
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
  const float64x2_t t = vdupq_n_f64(temperature);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t scaled = vdivq_f64(vld1q_f64(scores + i), t);
    out[i] = keep[i] ? vgetq_lane_f64(scaled, 0) : kNegInf;
    out[i + 1] = keep[i + 1] ? vgetq_lane_f64(scaled, 1) : kNegInf;
  }
  for (; i < n; ++i) out[i] = keep[i] ? scores[i] / temperature : kNegInf;
}

void exp_shift(const double* x, std::size_t n, double shift, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] - shift);
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{"neon",     max_value,   shifted_exp_sum,
                                 subtract,   contrastive, threshold_mask,
                                 mask_scale, exp_shift};
  return table;
}

}  // namespace cdd::logit::kernels
