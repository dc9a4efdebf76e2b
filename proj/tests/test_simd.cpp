#include <doctest.h>

#include <cmath>
#include <vector>

#include "confmix/experiments.hpp"
#include "confmix/rng.hpp"
#include "confmix/simd/kernels.hpp"

using namespace confmix;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t stream, double lo = -1.0, double hi = 1.0) {
    CounterRng r(77, stream);
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * r.uniform();
    return v;
}

// Restores the active table when a test case ends.
struct ActiveGuard {
    const simd::KernelTable& saved = simd::active();
    ~ActiveGuard() { simd::set_active(saved); }
};

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree") {
    const simd::KernelTable& S = simd::scalar_kernels();
    const simd::KernelTable* V = simd::avx2_kernels();
    if (!V) {
        MESSAGE("AVX2 kernels unavailable; only the scalar table is exercised");
        V = &S;
    }
    for (std::size_t n : {0, 1, 3, 4, 7, 64, 1001}) {
        auto a = random_vec(n, 1), b = random_vec(n, 2);
        CHECK(V->sum(a.data(), n) == doctest::Approx(S.sum(a.data(), n)).epsilon(1e-13));
        CHECK(V->dot(a.data(), b.data(), n) == doctest::Approx(S.dot(a.data(), b.data(), n)).epsilon(1e-13));
        CHECK(V->max_abs(a.data(), n) == S.max_abs(a.data(), n));
        CHECK(V->max_abs_diff(a.data(), b.data(), n) == S.max_abs_diff(a.data(), b.data(), n));
        auto sa = a, va = a;
        S.scale(sa.data(), 0.37, n);
        V->scale(va.data(), 0.37, n);
        CHECK(sa == va);
    }
    for (std::size_t m : {2, 3, 4, 5, 8}) {
        const std::size_t blocks = 37, n = blocks * m;
        auto w = random_vec(n, 3), x = random_vec(n, 4), out0 = random_vec(n, 5);
        auto o1 = out0, o2 = out0;
        S.block_broadcast_mul_add(o1.data(), w.data(), x.data(), n, m);
        V->block_broadcast_mul_add(o2.data(), w.data(), x.data(), n, m);
        for (std::size_t i = 0; i < n; ++i) CHECK(o2[i] == doctest::Approx(o1[i]).epsilon(1e-14));
        std::vector<double> d1(blocks), d2(blocks);
        S.block_dot(d1.data(), w.data(), x.data(), blocks, m);
        V->block_dot(d2.data(), w.data(), x.data(), blocks, m);
        for (std::size_t i = 0; i < blocks; ++i) CHECK(d2[i] == doctest::Approx(d1[i]).epsilon(1e-13));
    }
}

TEST_CASE("hit classification kernels agree flag for flag") {
    const simd::KernelTable& S = simd::scalar_kernels();
    const simd::KernelTable* V = simd::avx2_kernels();
    if (!V) V = &S;
    const std::size_t n = 4099;
    auto p = random_vec(n, 6, 0.0, 1.0), r = random_vec(n, 7, 0.0, 0.5);
    // Put some points right at the radius to exercise the near band.
    for (std::size_t i = 0; i < n; i += 17) p[i] = 0.3 + r[i] * (1.0 + 1e-9 * ((i % 3) - 1.0));
    std::vector<std::uint8_t> f1(n), f2(n);
    CHECK(S.classify_hits_1d(p.data(), 0.3, r.data(), 1e-7, 1e-13, n, f1.data()) ==
          V->classify_hits_1d(p.data(), 0.3, r.data(), 1e-7, 1e-13, n, f2.data()));
    CHECK(f1 == f2);
    std::size_t near = 0;
    for (auto f : f1) near += f == simd::kNear;
    CHECK(near > 0);

    auto q = random_vec(2 * n, 8, 0.0, 1.0);
    CHECK(S.classify_hits_2d(q.data(), 0.5, 0.4, r.data(), 1e-7, 1e-13, n, f1.data()) ==
          V->classify_hits_2d(q.data(), 0.5, 0.4, r.data(), 1e-7, 1e-13, n, f2.data()));
    CHECK(f1 == f2);
}

TEST_CASE("runs and eigendata agree under either kernel table") {
    ActiveGuard guard;
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    RunOptions o;
    o.seed = 4;
    std::vector<std::vector<CountingRecord>> runs;
    std::vector<double> R;
    std::vector<std::vector<double>> tables;
    for (const simd::KernelTable* t : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
        if (!t) continue;
        simd::set_active(*t);
        runs.push_back(recurrence_pure_run(s, d, RadiusFunction::power(1.0, 0.5), 5000, 6, o));
        GibbsBackend g = eigen_solve(s, PotentialSpec::conformal_power(1.0, 6), 6);
        R.push_back(g.spectral_data()->R);
        tables.push_back(cylinder_table(g, 6));
    }
    if (runs.size() < 2) return;
    for (std::size_t i = 0; i < runs[0].size(); ++i)
        for (std::size_t k = 0; k < runs[0][i].checkpoints.size(); ++k)
            CHECK(runs[0][i].checkpoints[k].count == runs[1][i].checkpoints[k].count);
    CHECK(R[0] == doctest::Approx(R[1]).epsilon(1e-12));
    for (std::size_t i = 0; i < tables[0].size(); ++i) CHECK(std::fabs(tables[0][i] - tables[1][i]) <= 1e-12);
}
