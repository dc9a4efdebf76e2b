#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "confmix/dynamics.hpp"
#include "confmix/gibbs.hpp"
#include "confmix/ifs.hpp"
#include "confmix/measure.hpp"

namespace confmix {

struct Checkpoint {
    std::size_t N = 0;
    std::uint64_t count = 0;
    double psi_sum = 0.0;
    std::optional<double> ball_sum;
};

struct CountingRecord {
    std::uint64_t sample_id = 0;
    std::vector<Checkpoint> checkpoints;
    Point x0;
    std::uint64_t flagged = 0;    // steps whose refined distance is within 1e-9 relative of the radius
    std::uint64_t uncertain = 0;  // steps decided by a bracket midpoint
};

struct RunOptions {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    // Empty means default_checkpoints(N).
    std::vector<std::size_t> checkpoints;
    BracketOptions bracket;
    // Truncation tolerance of symbolic orbit points.
    double orbit_tol = 1e-15;
};

// 10^3, 3*10^3, 10^4, ... below N, then N.
std::vector<std::size_t> default_checkpoints(std::size_t N);

// Targets y_n, n >= 1; a single point is a constant target, a longer list
// repeats with period equal to its length.
struct TargetSequence {
    std::vector<Point> points;
    const Point& at(std::size_t n) const { return points[(n - 1) % points.size()]; }
};

// Hits T^n x in B(y_n, psi(n)). psi_sum = sum of mu(B(y_n, psi(n))) bracket midpoints.
std::vector<CountingRecord> shrinking_target_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                 const TargetSequence& targets, const RadiusFunction& psi,
                                                 std::size_t N, std::size_t samples, const RunOptions& opt);

// Hits T^n x in B(x, psi(n)). ball_sum = sum of mu(B(x, psi(n))) midpoints;
// psi_sum = sum of the recurrence integrals I(psi(n)) (see recurrence_integral).
std::vector<CountingRecord> recurrence_pure_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                const RadiusFunction& psi, std::size_t N, std::size_t samples,
                                                const RunOptions& opt);

// Hits T^n x in B(x, t_n(x)), t_n the radius with mu(B(x, t_n)) = psi(n).
// psi_sum = sum of psi(n).
std::vector<CountingRecord> recurrence_modified_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                    const RadiusFunction& psi, std::size_t N, std::size_t samples,
                                                    const RunOptions& opt);

// The expected-count normalizer of a checkpoint: ball_sum when present, else psi_sum.
double checkpoint_normalizer(const Checkpoint& c);

// (count - Psi) / (Psi^{1/2} log(Psi + 1)^{3/2 + eps}) per checkpoint, Psi the
// normalizer. Checkpoints with Psi <= 1 give NaN.
std::vector<double> bc_residual(const CountingRecord& record, double epsilon);
// Same with an explicit normalizer for the error scale.
double bc_residual_value(double count, double expected, double scale_sum, double epsilon);

// Estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

// I(r) = integral of mu(B(x, r)) dmu(x), the large-n limit of mu(R_n) for
// radius r. Exact-ball backends use Gauss-Legendre quadrature of the closed
// form; otherwise the Monte Carlo mean of mu(B(x, r)) over `samples`
// mu-points from `seed` (the same points for every r).
double recurrence_integral(const IfsSystem& sys, const GibbsBackend& mu, double r, std::size_t samples = 4096,
                           std::uint64_t seed = 1, const BracketOptions& opt = {});
// The Monte Carlo version for every backend.
Estimate recurrence_integral_mc(const IfsSystem& sys, const GibbsBackend& mu, double r, std::size_t samples,
                                std::uint64_t seed, const BracketOptions& opt = {});

// Bracket on the sum of mu(B(x, psi(n))) over n_from < n <= n_to. psi is
// non-increasing, so each run of equal radii costs one ball bracket. Throws
// when the range holds more than 10^7 distinct radii.
MeasureBracket ball_sum_range(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, const RadiusFunction& psi,
                              std::uint64_t n_from, std::uint64_t n_to, const BracketOptions& opt = {});

// Monte Carlo mu(R_n) = mu{x : |T^n x - x| < r}.
Estimate recurrence_set_mc(const IfsSystem& sys, const GibbsBackend& mu, std::size_t n, double r,
                           std::size_t samples, std::uint64_t seed, unsigned threads = 1);
// Monte Carlo mu(R^_n) = mu{x : |T^n x - x| < t_n(x)} for measure level psi.
Estimate modified_recurrence_set_mc(const IfsSystem& sys, const GibbsBackend& mu, std::size_t n, double psi,
                                    std::size_t samples, std::uint64_t seed, unsigned threads = 1,
                                    const BracketOptions& opt = {});

struct PairwiseRecord {
    double lhs = 0.0;       // sum over a <= m, n <= b of mu(A_m ∩ A_n)
    double rhs_main = 0.0;  // (sum mu(A_n))^2
    double rhs_error = 0.0; // sum mu(A_n)
    bool exact = true;
    std::size_t samples = 0;  // Monte Carlo sample count (ball events)
    double lhs_stderr = 0.0;
};

// A_n = sigma^{-n} E_n for cylinder sets E_n.
PairwiseRecord pairwise_independence_check(const GibbsBackend& mu, const std::function<CylinderSet(std::size_t)>& events,
                                           std::size_t a, std::size_t b);
// A_n = T^{-n} B(y, psi(n)); lhs = E[S^2] with S the hit count on [a, b],
// estimated from `samples` orbits.
PairwiseRecord pairwise_independence_balls(const IfsSystem& sys, const GibbsBackend& mu, const Point& y,
                                           const RadiusFunction& psi, std::size_t a, std::size_t b,
                                           std::size_t samples, std::uint64_t seed, const BracketOptions& opt = {});

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double n_min = 0.0;
    double n_max = 0.0;
    double gamma() const;
    // Rounding leaves flat series with slopes of order 1e-17.
    bool mixing() const { return slope < -1e-12; }
};

// Least squares of log(value) on n. Throws on fewer than 4 points or a
// non-positive value.
RateFit fit_exponential_rate(const std::vector<std::pair<double, double>>& series);

// C and gamma with phi(n) <= C gamma^n on the fitted window: gamma from the
// slope, C the smallest such constant, at least 1.
struct MixingEnvelope {
    double C = 1.0;
    double gamma = 0.0;
    RateFit fit;
    bool fitted = false;  // false when every value is zero
};
MixingEnvelope mixing_envelope(const std::vector<std::pair<double, double>>& series);

// Product of two systems with the max metric; cubes are pairs of equal-depth cylinders.
class ProductSystem {
public:
    ProductSystem(const IfsSystem& a, const GibbsBackend& mu_a, const IfsSystem& b, const GibbsBackend& mu_b);

    double cylinder_measure(const FiniteWord& I1, const FiniteWord& I2) const;
    // max over cubes C_I, C_J of depth k of |mu(C_I ∩ T^{-n} C_J) / mu(C_J) - mu(C_I)|.
    double cube_mixing(int k, int n) const;

    const IfsSystem& system_a() const { return *a_; }
    const IfsSystem& system_b() const { return *b_; }
    const GibbsBackend& measure_a() const { return *mu_a_; }
    const GibbsBackend& measure_b() const { return *mu_b_; }

private:
    const IfsSystem* a_;
    const GibbsBackend* mu_a_;
    const IfsSystem* b_;
    const GibbsBackend* mu_b_;
};

ProductSystem product_system(const IfsSystem& a, const GibbsBackend& mu_a, const IfsSystem& b,
                             const GibbsBackend& mu_b);

// Pairs (mu([I] ∩ sigma^{-n}[J]) / mu([J]), mu([I])) over all I, J of length k.
std::vector<std::pair<double, double>> conditional_pairs(const GibbsBackend& mu, int k, int n);

// Window endpoints 1/H and 1/(-ln sum p^2) (natural log) and their midpoint.
struct AbbWindow {
    double lower = 0.0;
    double upper = 0.0;
    double alpha() const { return 0.5 * (lower + upper); }
};
AbbWindow abb_window(const std::vector<double>& p);

// Named example reports. `scale` in (0, 1] shrinks sample counts and orbit
// lengths for quick runs; 1 is the canonical configuration.
struct ExampleOptions {
    std::uint64_t seed = 20240607;
    unsigned threads = 1;
    double scale = 1.0;
};
std::vector<std::pair<std::string, std::string>> example_catalog();
nlohmann::json run_named_example(const std::string& name, const ExampleOptions& opt = {});

}  // namespace confmix
