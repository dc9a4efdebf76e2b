#include <immintrin.h>

#include <cmath>

#include "confmix/simd/kernels.hpp"

namespace confmix::simd {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

inline __m256d vabs(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

void block_broadcast_mul_add(double* out, const double* w, const double* x, std::size_t n, std::size_t m) {
    std::size_t i = 0;
    if (m == 4) {
        for (; i + 4 <= n; i += 4) {
            __m256d xv = _mm256_broadcast_sd(x + i / 4);
            __m256d o = _mm256_loadu_pd(out + i);
            _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(w + i), xv, o));
        }
    } else if (m == 2) {
        for (; i + 4 <= n; i += 4) {
            __m256d xv = _mm256_set_pd(x[i / 2 + 1], x[i / 2 + 1], x[i / 2], x[i / 2]);
            __m256d o = _mm256_loadu_pd(out + i);
            _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(w + i), xv, o));
        }
    } else if (m >= 4) {
        for (std::size_t b = 0; b * m < n; ++b) {
            __m256d xv = _mm256_broadcast_sd(x + b);
            std::size_t k = b * m, end = std::min(n, k + m);
            for (; k + 4 <= end; k += 4) {
                __m256d o = _mm256_loadu_pd(out + k);
                _mm256_storeu_pd(out + k, _mm256_fmadd_pd(_mm256_loadu_pd(w + k), xv, o));
            }
            for (; k < end; ++k) out[k] += w[k] * x[b];
        }
        return;
    }
    for (; i < n; ++i) out[i] += w[i] * x[i / m];
}

void block_dot(double* out, const double* w, const double* x, std::size_t blocks, std::size_t m) {
    if (m == 4) {
        for (std::size_t b = 0; b < blocks; ++b) {
            out[b] = hsum(_mm256_mul_pd(_mm256_loadu_pd(w + 4 * b), _mm256_loadu_pd(x + 4 * b)));
        }
        return;
    }
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* wb = w + b * m;
        const double* xb = x + b * m;
        std::size_t a = 0;
        __m256d acc = _mm256_setzero_pd();
        for (; a + 4 <= m; a += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(wb + a), _mm256_loadu_pd(xb + a), acc);
        double s = hsum(acc);
        for (; a < m; ++a) s += wb[a] * xb[a];
        out[b] = s;
    }
}

double sum(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, vabs(_mm256_loadu_pd(x + i)));
    double m = hmax(acc);
    for (; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
    return m;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_max_pd(acc, vabs(_mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))));
    }
    double m = hmax(acc);
    for (; i < n; ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
    return m;
}

void scale(double* x, double s, std::size_t n) {
    __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), sv));
    for (; i < n; ++i) x[i] *= s;
}

// Band arithmetic mirrors the scalar kernel (no FMA) so flags agree exactly.
inline std::uint8_t classify_scalar(double d, double r, double slack, double abs_slack) {
    double band = slack * r + abs_slack;
    if (d < r - band) return kHit;
    if (d > r + band) return kMiss;
    return kNear;
}

inline std::size_t store_flags(__m256d d, __m256d r, __m256d slack, __m256d abs_slack, std::uint8_t* flags) {
    __m256d band = _mm256_add_pd(_mm256_mul_pd(slack, r), abs_slack);
    int hit = _mm256_movemask_pd(_mm256_cmp_pd(d, _mm256_sub_pd(r, band), _CMP_LT_OQ));
    int miss = _mm256_movemask_pd(_mm256_cmp_pd(d, _mm256_add_pd(r, band), _CMP_GT_OQ));
    std::size_t count = 0;
    for (int k = 0; k < 4; ++k) {
        std::uint8_t f = (hit >> k) & 1 ? kHit : ((miss >> k) & 1 ? kMiss : kNear);
        flags[k] = f;
        count += f != kMiss;
    }
    return count;
}

std::size_t classify_hits_1d(const double* p, double c, const double* r, double slack, double abs_slack,
                             std::size_t n, std::uint8_t* flags) {
    const __m256d cv = _mm256_set1_pd(c), sv = _mm256_set1_pd(slack), av = _mm256_set1_pd(abs_slack);
    std::size_t count = 0, i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = vabs(_mm256_sub_pd(_mm256_loadu_pd(p + i), cv));
        __m256d rv = _mm256_loadu_pd(r + i);
        // Fast path: the whole group is clearly outside.
        __m256d band = _mm256_add_pd(_mm256_mul_pd(sv, rv), av);
        if (_mm256_movemask_pd(_mm256_cmp_pd(d, _mm256_add_pd(rv, band), _CMP_GT_OQ)) == 0xF) {
            flags[i] = flags[i + 1] = flags[i + 2] = flags[i + 3] = kMiss;
            continue;
        }
        count += store_flags(d, rv, sv, av, flags + i);
    }
    for (; i < n; ++i) {
        flags[i] = classify_scalar(std::fabs(p[i] - c), r[i], slack, abs_slack);
        count += flags[i] != kMiss;
    }
    return count;
}

std::size_t classify_hits_2d(const double* p, double cx, double cy, const double* r, double slack,
                             double abs_slack, std::size_t n, std::uint8_t* flags) {
    const __m256d sv = _mm256_set1_pd(slack), av = _mm256_set1_pd(abs_slack);
    const __m256d cxy = _mm256_set_pd(cy, cx, cy, cx);
    std::size_t count = 0, i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_sub_pd(_mm256_loadu_pd(p + 2 * i), cxy);      // x0 y0 x1 y1
        __m256d b = _mm256_sub_pd(_mm256_loadu_pd(p + 2 * i + 4), cxy);  // x2 y2 x3 y3
        a = _mm256_mul_pd(a, a);
        b = _mm256_mul_pd(b, b);
        __m256d h = _mm256_hadd_pd(a, b);  // d0 d2 d1 d3
        h = _mm256_permute4x64_pd(h, 0xD8);  // d0 d1 d2 d3
        __m256d d = _mm256_sqrt_pd(h);
        count += store_flags(d, _mm256_loadu_pd(r + i), sv, av, flags + i);
    }
    for (; i < n; ++i) {
        double dx = p[2 * i] - cx, dy = p[2 * i + 1] - cy;
        flags[i] = classify_scalar(std::sqrt(dx * dx + dy * dy), r[i], slack, abs_slack);
        count += flags[i] != kMiss;
    }
    return count;
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
    static const KernelTable table{"avx2", block_broadcast_mul_add, block_dot, sum, dot, max_abs,
                                   max_abs_diff, scale, classify_hits_1d, classify_hits_2d};
    return &table;
}

}  // namespace confmix::simd
