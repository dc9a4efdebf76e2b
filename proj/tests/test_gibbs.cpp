#include <doctest.h>

#include <cmath>

#include "confmix/gibbs.hpp"

using namespace confmix;

namespace {

// Simpson integral of the Gauss-like density over [a, b].
double gauss_mass(double a, double b) {
    const int n = 2000;
    const double h = (b - a) / n;
    auto f = [](double x) { return 1.0 / (std::log(2.0) * (1.0 + x)); };
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

void check_identities(const GibbsBackend& mu, int depth, double tol) {
    const int m = mu.alphabet();
    for (int k = 1; k <= depth; ++k) {
        auto t = cylinder_table(mu, k);
        double total = 0.0;
        for (double v : t) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(tol));
        auto parent = cylinder_table(mu, k - 1);
        for (std::size_t I = 0; I < parent.size(); ++I) {
            double kids = 0.0, left = 0.0;
            for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j) {
                kids += t[I * static_cast<std::size_t>(m) + j];
                left += t[j * parent.size() + I];
            }
            // Additivity mu([I]) = sum_j mu([Ij]); shift invariance mu([I]) = sum_j mu([jI]).
            CHECK(std::fabs(kids - parent[I]) <= tol);
            CHECK(std::fabs(left - parent[I]) <= tol);
        }
    }
}

}  // namespace

TEST_CASE("Bernoulli cylinder measures") {
    GibbsBackend b = GibbsBackend::bernoulli({0.3, 0.7});
    CHECK(b.cylinder_measure(FiniteWord::parse("12")) == doctest::Approx(0.21));
    CHECK(b.cylinder_measure(FiniteWord::parse("221")) == doctest::Approx(0.147));
    auto c = b.conditional_next(FiniteWord::parse("1"));
    CHECK(c[0] == doctest::Approx(0.3));
    CHECK_THROWS(GibbsBackend::bernoulli({0.3, 0.6}));
    CHECK_THROWS(GibbsBackend::bernoulli({1.0}));
    check_identities(b, 8, 1e-12);
}

TEST_CASE("closed-form density backend matches integrals of h") {
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    for (const char* w : {"1", "2", "34", "4132"}) {
        Interval iv = s.cylinder_interval(s.compose_word(FiniteWord::parse(w)));
        CHECK(d.cylinder_measure(FiniteWord::parse(w)) == doctest::Approx(gauss_mass(iv.lo, iv.hi)).epsilon(1e-10));
    }
    CHECK(d.interval_mass(0.0, 1.0) == doctest::Approx(1.0));
    CHECK(d.density_at(0.0) == doctest::Approx(1.0 / std::log(2.0)));
    check_identities(d, 6, 1e-12);
    CHECK_THROWS(GibbsBackend::density(IfsSystem::builtin("cantor"), DensityKind::GaussLike));
}

TEST_CASE("eigen_solve on example 7.2 reproduces the Gauss-like measure") {
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend g = eigen_solve(s, PotentialSpec::conformal_power(1.0, 6), 6);
    const SpectralData& sd = *g.spectral_data();
    CHECK(sd.R == doctest::Approx(1.0).epsilon(1e-6));
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    auto a = cylinder_table(g, 6), b = cylinder_table(d, 6);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] / b[i] - 1.0));
    CHECK(worst < 1e-3);
    check_identities(g, 6, 1e-12);
}

TEST_CASE("eigen_solve with a Bernoulli potential gives the product measure") {
    IfsSystem c = IfsSystem::builtin("cantor");
    GibbsBackend g = eigen_solve(c, PotentialSpec::bernoulli({0.3, 0.7}), 8);
    GibbsBackend b = GibbsBackend::bernoulli({0.3, 0.7});
    auto x = cylinder_table(g, 8), y = cylinder_table(b, 8);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(x[i] - y[i]) <= 1e-9);
    CHECK(g.spectral_data()->R == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform Cantor measure from the conformal potential with tau = log 2 / log 3") {
    IfsSystem c = IfsSystem::builtin("cantor");
    GibbsBackend g = eigen_solve(c, PotentialSpec::conformal_power(std::log(2.0) / std::log(3.0), 6), 6);
    for (double v : cylinder_table(g, 6)) CHECK(v == doctest::Approx(1.0 / 64.0).epsilon(1e-10));
}

TEST_CASE("joint cylinder measures") {
    GibbsBackend b = GibbsBackend::bernoulli({0.3, 0.7});
    FiniteWord I = FiniteWord::parse("12"), J = FiniteWord::parse("21");
    // Disjoint blocks multiply.
    CHECK(joint_cylinder_measure(b, I, 2, J).value == doctest::Approx(0.21 * 0.21));
    CHECK(joint_cylinder_measure(b, I, 5, J).value == doctest::Approx(0.21 * 0.21));
    // Overlap "12" with "21" shifted by one: word 121.
    CHECK(joint_cylinder_measure(b, I, 1, J).value == doctest::Approx(0.3 * 0.7 * 0.3));
    // Incompatible overlap.
    CHECK(joint_cylinder_measure(b, I, 1, FiniteWord::parse("11")).value == 0.0);
    // Lag 0 is the intersection of the cylinders.
    CHECK(joint_cylinder_measure(b, I, 0, FiniteWord::parse("1")).value == doctest::Approx(0.21));
}

TEST_CASE("joint measures on the density backend agree with the concatenated cylinder") {
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    FiniteWord I = FiniteWord::parse("13"), J = FiniteWord::parse("24");
    // Gap of one symbol: sum over the free symbol.
    double expect = 0.0;
    for (int j = 1; j <= 4; ++j) expect += d.cylinder_measure(FiniteWord::parse("13" + std::to_string(j) + "24"));
    JointMeasure jm = joint_cylinder_measure(d, I, 3, J);
    CHECK(jm.exact);
    CHECK(jm.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mixing coefficient matches brute-force enumeration") {
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    GibbsBackend b = GibbsBackend::bernoulli({0.2, 0.5, 0.3});
    for (const GibbsBackend* mu : {&d, &b}) {
        const int m = mu->alphabet();
        for (int k = 1; k <= 3; ++k) {
            for (int n = 0; n <= 4; ++n) {
                double worst = 0.0;
                const std::uint64_t nk = static_cast<std::uint64_t>(std::pow(m, k));
                for (std::uint64_t i = 0; i < nk; ++i) {
                    FiniteWord I = FiniteWord::from_index(i, static_cast<std::size_t>(k), m);
                    for (std::uint64_t j = 0; j < nk; ++j) {
                        FiniteWord J = FiniteWord::from_index(j, static_cast<std::size_t>(k), m);
                        double v = joint_cylinder_measure(*mu, I, static_cast<std::size_t>(n), J).value;
                        worst = std::max(worst, std::fabs(v / mu->cylinder_measure(J) - mu->cylinder_measure(I)));
                    }
                }
                CHECK(mixing_coeff_cylinders(*mu, k, n) == doctest::Approx(worst).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("Bernoulli mixing vanishes exactly once blocks are disjoint") {
    GibbsBackend b = GibbsBackend::bernoulli({0.3, 0.7});
    for (int k = 1; k <= 8; ++k)
        for (int n = k; n <= k + 3; ++n) CHECK(mixing_coeff_cylinders(b, k, n) == 0.0);
    // Overlapping blocks: the mismatch pairs give max_I mu([I]) exactly for k = 2, n = 1.
    CHECK(mixing_coeff_cylinders(b, 2, 1) == doctest::Approx(0.49));
}

TEST_CASE("quasi-Bernoulli and Gibbs checks") {
    GibbsBackend b = GibbsBackend::bernoulli({0.3, 0.7});
    GibbsCheck q = quasi_bernoulli_bound(b, 4);
    CHECK(q.min_ratio == doctest::Approx(1.0));
    CHECK(q.max_ratio == doctest::Approx(1.0));
    IfsSystem s = IfsSystem::builtin("example_7_2");
    GibbsBackend d = GibbsBackend::density(s, DensityKind::GaussLike);
    GibbsCheck qd = quasi_bernoulli_bound(d, 3);
    CHECK(qd.min_ratio > 0.2);
    CHECK(qd.max_ratio < 5.0);
    GibbsCheck gd = verify_gibbs_property(d, s, 6);
    CHECK(gd.constant() < 10.0);
}

TEST_CASE("potential spec JSON") {
    PotentialSpec p = PotentialSpec::from_json(nlohmann::json{{"type", "conformal_power"}, {"tau", 0.5}, {"depth", 7}});
    CHECK(p.kind == PotentialSpec::Kind::ConformalPower);
    CHECK(p.tau == 0.5);
    CHECK(PotentialSpec::from_json(p.to_json()).to_json() == p.to_json());
    CHECK_THROWS(PotentialSpec::from_json(nlohmann::json{{"type", "mystery"}}));
}
