#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace confmix::simd {

// Hit classification codes written by classify_hits_*.
enum : std::uint8_t { kMiss = 0, kHit = 1, kNear = 2 };

struct KernelTable {
    const char* name;
    // out[i] += w[i] * x[i / m] for i < n (one x value per block of m weights)
    void (*block_broadcast_mul_add)(double* out, const double* w, const double* x, std::size_t n, std::size_t m);
    // out[b] = sum_{a < m} w[b*m + a] * x[b*m + a] for b < blocks
    void (*block_dot)(double* out, const double* w, const double* x, std::size_t blocks, std::size_t m);
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*max_abs)(const double* x, std::size_t n);
    double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
    void (*scale)(double* x, double s, std::size_t n);
    // flags[i] = kHit if |p[i] - c| < r[i] - slack*r[i] - abs_slack, kMiss if
    // |p[i] - c| > r[i] + slack*r[i] + abs_slack, kNear otherwise. Returns the
    // number of entries that are not kMiss.
    std::size_t (*classify_hits_1d)(const double* p, double c, const double* r, double slack, double abs_slack,
                                    std::size_t n, std::uint8_t* flags);
    // Same with interleaved (x, y) points.
    std::size_t (*classify_hits_2d)(const double* p, double cx, double cy, const double* r, double slack,
                                    double abs_slack, std::size_t n, std::uint8_t* flags);
};

const KernelTable& scalar_kernels();
// nullptr when not compiled in or not supported by the running CPU.
const KernelTable* avx2_kernels();

// Table chosen once at first use: AVX2 when available, unless the
// CONFMIX_SIMD environment variable is "scalar".
const KernelTable& active();
void set_active(const KernelTable& table);

}  // namespace confmix::simd
