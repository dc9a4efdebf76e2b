#pragma once

#include <cstdint>
#include <vector>

#include "confmix/gibbs.hpp"
#include "confmix/ifs.hpp"
#include "confmix/rng.hpp"
#include "confmix/word.hpp"

namespace confmix {

// Draws mu-distributed symbol sequences. Sample i under a master seed always
// uses counter stream i, so results do not depend on scheduling.
class MuSampler {
public:
    MuSampler(const GibbsBackend& backend, std::uint64_t seed, std::uint64_t stream = 0)
        : backend_(&backend), seed_(seed), stream_(stream) {}

    const GibbsBackend& backend() const { return *backend_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    void set_stream(std::uint64_t stream) { stream_ = stream; }

    // First n symbols of the sequence for the current stream.
    std::vector<Symbol> draw(std::size_t n) const;
    // Stream whose first prefix_depth symbols are drawn eagerly; later symbols
    // continue the same chain on demand.
    SymbolStream stream_of(std::size_t prefix_depth) const;

private:
    const GibbsBackend* backend_;
    std::uint64_t seed_;
    std::uint64_t stream_;
};

SymbolStream sample_mu(const MuSampler& sampler, std::size_t prefix_depth);

// T(x) = phi_i^{-1}(x) for the lowest i whose closed depth-1 hull contains x
// within tol. Throws std::domain_error when no hull does.
Point t_apply(const IfsSystem& sys, const Point& x, double tol = 1e-12);

// Points pi(sigma^n w) for n = 0..N of a finite symbol sequence, computed by
// the backward recursion y_n = phi_{w_n}(y_{n+1}) from the base point. The
// sequence must have N + symbols_for_tolerance(tol) symbols.
class SampledOrbit {
public:
    SampledOrbit(const IfsSystem& sys, std::vector<Symbol> symbols, std::size_t N, double tol);

    std::size_t steps() const { return N_; }
    int dim() const { return dim_; }
    const std::vector<Symbol>& symbols() const { return symbols_; }
    Point point(std::size_t n) const;
    // Coordinates of points 0..N: x values (d = 1) or interleaved (x, y) pairs (d = 2).
    const double* coords() const { return coords_.data(); }

    // |y_a - y_b| through the common prefix of sigma^a w and sigma^b w:
    // phi_P(u) - phi_P(v) is evaluated as a product of one-map secant ratios
    // times |u - v|, which keeps full relative precision for close points.
    double refined_distance(std::size_t a, std::size_t b) const;

private:
    const IfsSystem* sys_;
    int dim_;
    std::size_t N_;
    std::size_t slack_;
    std::vector<Symbol> symbols_;
    std::vector<double> coords_;  // points 0..N + slack
};

std::vector<Point> orbit_symbolic(SymbolStream stream, std::size_t N, const IfsSystem& sys, double tol);

// Indicator of a finite union of cylinders; the words must form an antichain.
struct CylinderSet {
    std::vector<FiniteWord> words;
};

// mu(E1 ∩ T^{-n} E2) - mu(E1) mu(E2), exact up to the long-gap chain (see
// joint_cylinder_measure). `exact` reports whether every term was exact.
struct Correlation {
    double value = 0.0;
    bool exact = true;
};
Correlation correlation(const GibbsBackend& backend, const CylinderSet& f1, const CylinderSet& f2, long n);

}  // namespace confmix
