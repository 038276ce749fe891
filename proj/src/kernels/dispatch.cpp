#include <cstdlib>
#include <string_view>

#include "stiffgate/kernels.hpp"

namespace stiffgate::kernels {

#ifndef STIFFGATE_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_supports_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> tables{&scalar_table()};
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_supports_avx2_fma())
    tables.push_back(t);
  return tables;
}

const KernelTable& active() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* env = std::getenv("STIFFGATE_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
    const KernelTable* avx2 = avx2_table();
    if (avx2 != nullptr && cpu_supports_avx2_fma()) return *avx2;
    return scalar_table();
  }();
  return table;
}

}  // namespace stiffgate::kernels
