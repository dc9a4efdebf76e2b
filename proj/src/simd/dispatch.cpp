#include <atomic>
#include <cstdlib>
#include <cstring>

#include "confmix/simd/kernels.hpp"

namespace confmix::simd {

#ifdef CONFMIX_HAVE_AVX2_TU
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#ifdef CONFMIX_HAVE_AVX2_TU
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? avx2_kernels_impl() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* choose() {
    const char* env = std::getenv("CONFMIX_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> s{choose()};
    return s;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_release); }

}  // namespace confmix::simd
