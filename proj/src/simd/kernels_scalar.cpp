#include <cmath>

#include "confmix/simd/kernels.hpp"

namespace confmix::simd {

namespace {

void block_broadcast_mul_add(double* out, const double* w, const double* x, std::size_t n, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) out[i] += w[i] * x[i / m];
}

void block_dot(double* out, const double* w, const double* x, std::size_t blocks, std::size_t m) {
    for (std::size_t b = 0; b < blocks; ++b) {
        double acc = 0.0;
        for (std::size_t a = 0; a < m; ++a) acc += w[b * m + a] * x[b * m + a];
        out[b] = acc;
    }
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
    return m;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
    return m;
}

void scale(double* x, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

inline std::uint8_t classify(double d, double r, double slack, double abs_slack) {
    double band = slack * r + abs_slack;
    if (d < r - band) return kHit;
    if (d > r + band) return kMiss;
    return kNear;
}

std::size_t classify_hits_1d(const double* p, double c, const double* r, double slack, double abs_slack,
                             std::size_t n, std::uint8_t* flags) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        flags[i] = classify(std::fabs(p[i] - c), r[i], slack, abs_slack);
        count += flags[i] != kMiss;
    }
    return count;
}

std::size_t classify_hits_2d(const double* p, double cx, double cy, const double* r, double slack,
                             double abs_slack, std::size_t n, std::uint8_t* flags) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = p[2 * i] - cx, dy = p[2 * i + 1] - cy;
        flags[i] = classify(std::sqrt(dx * dx + dy * dy), r[i], slack, abs_slack);
        count += flags[i] != kMiss;
    }
    return count;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{"scalar", block_broadcast_mul_add, block_dot, sum, dot, max_abs,
                                   max_abs_diff, scale, classify_hits_1d, classify_hits_2d};
    return table;
}

}  // namespace confmix::simd
