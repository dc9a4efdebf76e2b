#pragma once

#include <vector>

#include "confmix/gibbs.hpp"
#include "confmix/ifs.hpp"

namespace confmix {

// lower <= true value <= upper.
struct MeasureBracket {
    double lower = 0.0;
    double upper = 0.0;
    double mid() const { return 0.5 * (lower + upper); }
    double width() const { return upper - lower; }
};

struct BracketOptions {
    int depth_budget = 200;
    // Straddling cylinders lighter than this are not refined; they count
    // toward the upper bound only.
    double min_mass = 1e-14;
};

// Shrinking radius sequences psi(n), n >= 1.
struct RadiusFunction {
    enum class Kind { Constant, Power, PowerLog };
    Kind kind = Kind::Constant;
    double c = 1.0;      // Constant: psi = c; Power: psi = c n^{-beta}
    double beta = 0.5;
    double alpha = 1.0;  // PowerLog: psi = base^{-floor(alpha ln n)}
    double base = 3.0;

    static RadiusFunction constant(double c);
    static RadiusFunction power(double c, double beta);
    static RadiusFunction power_log(double alpha, double base = 3.0);
    static RadiusFunction from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    double operator()(std::size_t n) const;
};

// Points of the open ball B(x, r) within distance rho of the hyperplane <y, normal> = offset.
struct StripBallRegion {
    Point center;
    double radius;
    Point normal;  // unit normal
    double offset;
    double rho;
};

MeasureBracket ball_measure(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                            const BracketOptions& opt = {});
MeasureBracket annulus_measure(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r, double rho,
                               const BracketOptions& opt = {});
MeasureBracket strip_ball_measure(const IfsSystem& sys, const GibbsBackend& mu, const StripBallRegion& region,
                                  const BracketOptions& opt = {});

// Exact interval mass when the backend has a closed-form density on an
// interval attractor; otherwise the pruned tree walk.
bool has_exact_balls(const IfsSystem& sys, const GibbsBackend& mu);

struct TnResult {
    double radius = 0.0;  // certified upper end: mu(B(x, radius)) >= psi
    double lo = 0.0;      // certified lower end: mu(B(x, lo)) < psi
    bool certified = false;
    int iterations = 0;
    MeasureBracket last;
};

// t_n = inf{r : mu(B(x, r)) >= psi}, by bisection on ball brackets over
// [0, diam K]. psi >= 1 gives diam K.
TnResult t_n_search(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double psi, double tol = 1e-10,
                    const BracketOptions& opt = {}, int max_iter = 200);
// Throws std::runtime_error when bisection cannot certify.
double t_n_radius(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double psi, double tol = 1e-10,
                  const BracketOptions& opt = {});

struct DensityRatioSeries {
    std::vector<double> ratio;  // mid(mu(B(x, psi(n)))) / psi(n)^tau
    std::vector<double> width;  // bracket width of the ratio
    std::vector<bool> uncertain;
    double running_min = 0.0;
    double running_max = 0.0;
};

DensityRatioSeries density_ratio_series(const IfsSystem& sys, const GibbsBackend& mu, const Point& x,
                                        const RadiusFunction& psi, double tau, std::size_t N,
                                        const BracketOptions& opt = {});

// mu(strip ∩ B(x, r)) / mu(B(x, r)) from brackets (midpoints). Throws if the
// ball bracket contains 0.
double hyperplane_decay_probe(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                              const Point& normal, double offset, double rho, const BracketOptions& opt = {});

// mu(B(x, 2r)) / mu(B(x, r)) from bracket midpoints, with the ratio bracket.
struct DoublingRatio {
    double ratio = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};
DoublingRatio doubling_ratio(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                             const BracketOptions& opt = {});

}  // namespace confmix
