#pragma once

// Vocabulary-wide arithmetic kernels behind logit-core.
//
// Every variant must be bit-identical to the scalar reference: elementwise
// ops are plain IEEE mul/sub/div (no FMA contraction), and reductions follow
// one canonical order. Sums use four lane accumulators (element i goes to
// lane i % 4), combined as (l0 + l1) + (l2 + l3). exp() is always the libm
// scalar exp, so vector variants only speed up the surrounding arithmetic.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cdd::logit::kernels {

struct KernelTable {
  const char* name;

  // Maximum of x[0..n); -inf when n == 0. A -0.0 result is returned as +0.0.
  double (*max_value)(const double* x, std::size_t n);

  // Canonical-order sum of exp(x[i] - shift).
  double (*shifted_exp_sum)(const double* x, std::size_t n, double shift);

  // out[i] = x[i] - c
  void (*subtract)(const double* x, std::size_t n, double c, double* out);

  // out[i] = (1 + beta) * ft[i] - beta * base[i]
  void (*contrastive)(const double* ft, const double* base, std::size_t n,
                      double beta, double* out);

  // keep[i] = p[i] >= threshold; returns the number kept.
  std::size_t (*threshold_mask)(const double* p, std::size_t n,
                                double threshold, std::uint8_t* keep);

  // out[i] = keep[i] ? scores[i] / temperature : -inf
  void (*mask_scale)(const double* scores, const std::uint8_t* keep,
                     std::size_t n, double temperature, double* out);

  // out[i] = exp(x[i] - shift)
  void (*exp_shift)(const double* x, std::size_t n, double shift, double* out);
};

const KernelTable& scalar();

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2();
const KernelTable* neon();

// The table used by logit-core. Resolved once: CDD_KERNELS=scalar|avx2|neon
// overrides, otherwise the widest supported variant wins.
const KernelTable& active();

// Test hook; pass nullptr to restore automatic selection.
void force(const KernelTable* table);

}  // namespace cdd::logit::kernels
