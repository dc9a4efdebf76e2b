#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "confmix/geometry.hpp"
#include "confmix/ifs.hpp"
#include "confmix/word.hpp"

namespace confmix {

// Invariant densities with a closed-form antiderivative on the attractor hull.
enum class DensityKind {
    GaussLike,  // h(x) = 1 / (log 2 (1 + x)) on [0, 1]
    Uniform,    // normalized Lebesgue measure on the hull
};

struct PotentialSpec {
    enum class Kind { Bernoulli, ConformalPower, ClosedFormDensity };
    Kind kind = Kind::Bernoulli;
    std::vector<double> p;                    // Bernoulli weights
    double tau = 1.0;                         // ConformalPower: g_j = |phi_j'|^tau
    int depth = 8;                            // ConformalPower: cylinder depth of the discretization
    DensityKind density = DensityKind::GaussLike;

    static PotentialSpec bernoulli(std::vector<double> p);
    static PotentialSpec conformal_power(double tau, int depth);
    static PotentialSpec closed_form(DensityKind kind);
    static PotentialSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Incremental state for walking down the cylinder tree.
struct MassCursor {
    double mass = 1.0;
    int depth = 0;
    std::uint64_t code = 0;    // base-m index of the word; valid while depth <= table depth
    std::uint64_t suffix = 0;  // index of the last (memory) symbols
    Mobius mob;                // composed map, closed-form density backend only
};

struct SpectralData;
struct MemoryChain;

struct GibbsCheck {
    double min_ratio = 1.0;
    double max_ratio = 1.0;
    double constant() const { return std::max(max_ratio, 1.0 / min_ratio); }
};

class GibbsBackend {
public:
    enum class Kind { Bernoulli, Density, Spectral };

    static GibbsBackend bernoulli(std::vector<double> p);
    // Requires a 1-D system whose attractor is its hull ([0, 1] for GaussLike).
    static GibbsBackend density(const IfsSystem& sys, DensityKind kind);
    static GibbsBackend spectral(std::shared_ptr<const SpectralData> data);

    Kind kind() const { return kind_; }
    int alphabet() const { return m_; }
    std::string describe() const;

    double cylinder_measure(const FiniteWord& w) const;
    std::vector<double> conditional_next(const FiniteWord& w) const;

    MassCursor root() const;
    MassCursor child(const MassCursor& parent, int j) const;
    // Law of the next symbol given the cursor's word; writes m values summing to 1.
    void conditionals(const MassCursor& c, double* out) const;

    // Bernoulli weights (Bernoulli backend only).
    const std::vector<double>& weights() const { return p_; }
    DensityKind density_kind() const { return density_; }
    // Closed-form density backend: mass of [lo, lo + width] intersected with the hull.
    double interval_mass(double lo, double hi) const;
    // Closed-form density backend: h(x).
    double density_at(double x) const;
    const SpectralData* spectral_data() const { return spectral_.get(); }
    // Memory of the finite-memory chain used for long gaps: 0 for Bernoulli,
    // D - 1 for spectral tables, a fixed order for closed-form densities.
    int chain_memory() const;
    // Next-symbol law given the last chain_memory() symbols; built on first use.
    const MemoryChain& memory_chain() const;

private:
    double mean_density(double lo, double width) const;
    double cursor_mass_from_map(const Mobius& f) const;

    Kind kind_ = Kind::Bernoulli;
    int m_ = 0;
    std::vector<double> p_;
    std::vector<double> cum_p_;
    // closed-form density
    DensityKind density_ = DensityKind::GaussLike;
    std::vector<Mobius> maps_;
    double a_ = 0.0, b_ = 1.0;
    std::vector<std::array<double, 2>> child_ends_;  // phi_j(a), phi_j(b)
    // spectral
    std::shared_ptr<const SpectralData> spectral_;
    mutable std::shared_ptr<const MemoryChain> chain_;
};

// Discretized transfer operator on depth-D cylinders, its eigendata and the
// resulting Gibbs measure table.
struct SpectralData {
    int m = 0;
    int depth = 0;
    double R = 0.0;              // leading eigenvalue estimate from the h iteration
    double R_adjoint = 0.0;      // same from the nu iteration
    double residual = 0.0;       // sup |L h - R h| / sup h
    int iterations_h = 0;
    int iterations_nu = 0;
    std::vector<double> h;       // per depth-D cylinder, normalized so sum h nu = 1
    std::vector<double> nu;      // per depth-D cylinder, total mass 1
    std::vector<double> anchors; // anchor phi_I(x0) per depth-D cylinder (d = 1)
    std::vector<std::vector<double>> levels;  // levels[d][I] = mu([I]), d = 0..depth
    PotentialSpec potential;
};

// Power iteration for h and nu of the depth-D discretization. Throws
// std::runtime_error when max_iter is reached without convergence.
GibbsBackend eigen_solve(const IfsSystem& sys, const PotentialSpec& potential, int depth, double tol = 1e-13,
                         int max_iter = 5000);

// Backend for a potential spec: Bernoulli, closed-form density, or eigen_solve.
GibbsBackend make_backend(const IfsSystem& sys, const PotentialSpec& potential);

// Ratios mu([I]) / g~^(n)(I 1^inf) over all words up to depth_max.
GibbsCheck verify_gibbs_property(const GibbsBackend& backend, const IfsSystem& sys, int depth_max);

// Extremes of mu([IJ]) / (mu([I]) mu([J])) over words with |I|, |J| <= max_len.
GibbsCheck quasi_bernoulli_bound(const GibbsBackend& backend, int max_len);

struct JointMeasure {
    double value = 0.0;
    bool exact = true;
};

// mu([I] ∩ sigma^{-lag}[J]).
JointMeasure joint_cylinder_measure(const GibbsBackend& backend, const FiniteWord& I, std::size_t lag,
                                    const FiniteWord& J);

// max over I, J in Sigma^k of |mu([I] ∩ sigma^{-n}[J]) / mu([J]) - mu([I])|.
double mixing_coeff_cylinders(const GibbsBackend& backend, int depth_k, int n);

// mu([I]) for every word of length k, in index order.
std::vector<double> cylinder_table(const GibbsBackend& backend, int k);

}  // namespace confmix
