#pragma once

// Brute-force reference computations for tests. Deliberately naive: long
// double, straight formulas, no shared code with the library kernels.

#include <cmath>
#include <cstddef>
#include <vector>

namespace cdd::testing {

inline std::vector<long double> oracle_log_softmax(const std::vector<double>& x) {
  long double total = 0.0L;
  for (double v : x) total += std::exp(static_cast<long double>(v));
  std::vector<long double> out;
  for (double v : x) out.push_back(std::log(std::exp(static_cast<long double>(v)) / total));
  return out;
}

// Full masked contrastive distribution for one position, starting from raw
// logits of both models.
inline std::vector<long double> oracle_cdd_distribution(const std::vector<double>& raw_ft,
                                                        const std::vector<double>& raw_base,
                                                        double beta, double alpha,
                                                        double temperature) {
  const auto lf = oracle_log_softmax(raw_ft);
  const auto lb = oracle_log_softmax(raw_base);
  const std::size_t n = lf.size();
  std::vector<long double> p(n);
  long double pmax = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(lf[i]);
    if (p[i] > pmax) pmax = p[i];
  }
  std::vector<long double> w(n, 0.0L);
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] < static_cast<long double>(alpha) * pmax) continue;
    const long double s = (1.0L + beta) * lf[i] - static_cast<long double>(beta) * lb[i];
    w[i] = std::exp(s / temperature);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace cdd::testing
