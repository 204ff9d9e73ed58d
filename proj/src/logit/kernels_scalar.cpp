#include <cmath>
#include <limits>

#include "cdd/logit/kernels.hpp"

namespace cdd::logit::kernels {
namespace {

double max_value(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m + 0.0;
}

double shifted_exp_sum(const double* x, std::size_t n, double shift) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lane[i % 4] += std::exp(x[i] - shift);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void subtract(const double* x, std::size_t n, double c, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - c;
}

void contrastive(const double* ft, const double* base, std::size_t n,
                 double beta, double* out) {
  const double gain = 1.0 + beta;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = gain * ft[i];
    const double b = beta * base[i];
    out[i] = a - b;
  }
}

std::size_t threshold_mask(const double* p, std::size_t n, double threshold,
                           std::uint8_t* keep) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = p[i] >= threshold ? 1 : 0;
    count += keep[i];
  }
  return count;
}

void mask_scale(const double* scores, const std::uint8_t* keep, std::size_t n,
                double temperature, double* out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = keep[i] ? scores[i] / temperature : kNegInf;
  }
}

void exp_shift(const double* x, std::size_t n, double shift, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] - shift);
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar",    max_value,      shifted_exp_sum,
                                 subtract,    contrastive,    threshold_mask,
                                 mask_scale,  exp_shift};
  return table;
}

}  // namespace cdd::logit::kernels
