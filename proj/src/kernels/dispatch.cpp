#include <cstdlib>
#include <string_view>

#include "palmlab/kernels.hpp"

namespace palmlab::kernels {

const KernelTable* avx2_table_unchecked() noexcept;

const KernelTable* avx2_table() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* env = std::getenv("PALMLAB_SIMD");
    if (env && std::string_view(env) == "scalar") return scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace palmlab::kernels
