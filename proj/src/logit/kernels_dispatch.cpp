#include <atomic>
#include <cstdlib>
#include <string_view>

#include "cdd/logit/kernels.hpp"

namespace cdd::logit::kernels {

#if defined(CDD_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(CDD_HAVE_NEON)
const KernelTable& neon_table();
#endif

const KernelTable* avx2() {
#if defined(CDD_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon() {
#if defined(CDD_HAVE_NEON)
  return &neon_table();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& resolve() {
  if (const char* env = std::getenv("CDD_KERNELS")) {
    const std::string_view want(env);
    if (want == "scalar") return scalar();
    if (want == "avx2" && avx2()) return *avx2();
    if (want == "neon" && neon()) return *neon();
  }
  if (const KernelTable* t = avx2()) return *t;
  if (const KernelTable* t = neon()) return *t;
  return scalar();
}

std::atomic<const KernelTable*> forced{nullptr};

}  // namespace

const KernelTable& active() {
  if (const KernelTable* t = forced.load(std::memory_order_acquire)) return *t;
  static const KernelTable& resolved = resolve();
  return resolved;
}

void force(const KernelTable* table) {
  forced.store(table, std::memory_order_release);
}

}  // namespace cdd::logit::kernels
