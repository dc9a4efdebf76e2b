#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "confmix/geometry.hpp"
#include "confmix/word.hpp"

namespace confmix {

struct Affine1D {
    double a = 1.0, b = 0.0;
};
struct Moebius1D {
    double p = 1.0, q = 0.0, r = 0.0, s = 1.0;
};
struct Similarity2D {
    double scale = 1.0;
    double rotation = 0.0;  // radians
    bool reflect = false;   // conjugate before rotating
    double tx = 0.0, ty = 0.0;
};

class ConformalMap {
public:
    using Params = std::variant<Affine1D, Moebius1D, Similarity2D>;

    ConformalMap(Affine1D m);
    ConformalMap(Moebius1D m);
    ConformalMap(Similarity2D m);

    int dim() const { return std::holds_alternative<Similarity2D>(params_) ? 2 : 1; }
    const Params& params() const { return params_; }
    const Mobius& mobius() const { return mobius_; }
    const Similarity& similarity() const { return similarity_; }

    Point apply(const Point& x) const;
    // |phi'(x)|
    double derivative_norm(const Point& x) const;
    // |phi(u) - phi(v)| / |u - v|
    double secant_ratio(const Point& u, const Point& v) const;
    Point inverse(const Point& y) const;

private:
    Params params_;
    Mobius mobius_;
    Similarity similarity_;
};

// Composed cylinder map phi_I, either a Moebius matrix (d = 1) or a similarity (d = 2).
struct CylinderMap {
    Mobius mob;
    Similarity sim;
};

struct ContractionConstants {
    double kappa = 0.0;
    double C1 = 1.0;
    double C2 = 1.0;
    double C3 = 1.0;
    double C4 = 1.0;
    int probe_depth = 0;
};

struct OscResult {
    bool holds = false;
    double max_overlap = 0.0;  // largest pairwise overlap length/area of images of V
    bool images_inside = false;
};

class IfsSystem {
public:
    // iterate_power = 0 searches n0 in 1..8.
    IfsSystem(std::vector<ConformalMap> maps, std::optional<Box> domain, std::optional<Box> osc_witness,
              int iterate_power = 0, std::string name = {});

    static IfsSystem from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    // "cantor", "example_7_2", "remark_7_2", "sierpinski", "two_line_cantor".
    static IfsSystem builtin(const std::string& name);
    static std::vector<std::string> builtin_names();

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    int alphabet() const { return static_cast<int>(maps_.size()); }
    const ConformalMap& map(int j) const { return maps_[static_cast<std::size_t>(j)]; }
    const Box& domain() const { return domain_; }
    const std::optional<Box>& osc_witness() const { return osc_witness_; }
    int iterate_power() const { return iterate_power_; }
    bool iterate_power_explicit() const { return iterate_power_explicit_; }

    // Fixed point of phi_1; the base point of the coding map and the anchor source.
    const Point& base_point() const { return base_point_; }
    // Axis-aligned hull of the attractor (exact in d = 1).
    const Box& attractor_box() const { return attractor_box_; }
    // Disk containing K (d = 2).
    const Disk& bounding_disk() const { return bounding_disk_; }
    // diam K is in [diameter_lo, diameter_hi].
    double diameter_lo() const { return diam_lo_; }
    double diameter_hi() const { return diam_hi_; }
    // True when d = 1 and the first-level images tile the hull, so K is an interval.
    bool attractor_is_interval() const { return attractor_is_interval_; }
    // max_j sup_domain |phi_j'|
    double kappa() const { return kappa_; }
    // (max over words of length n0 of sup |phi_I'|)^(1/n0): per-symbol contraction of long words.
    double step_contraction() const { return step_contraction_; }

    CylinderMap identity() const;
    // parent o phi_j
    CylinderMap extend(const CylinderMap& parent, int j) const;
    CylinderMap compose_word(const FiniteWord& w) const;
    Point apply_cylinder(const CylinderMap& f, const Point& x) const;
    // Interval hull of K_I (d = 1).
    Interval cylinder_interval(const CylinderMap& f) const;
    // Disk containing K_I (d = 2).
    Disk cylinder_disk(const CylinderMap& f) const;
    // Bracket on diam K_I.
    Interval cylinder_diameter(const CylinderMap& f) const;
    // sup and inf of |phi_I'| over the domain.
    Interval derivative_range(const CylinderMap& f) const;

private:
    void analyse();

    std::string name_;
    int dim_ = 1;
    std::vector<ConformalMap> maps_;
    Box domain_;
    bool domain_given_ = false;
    std::optional<Box> osc_witness_;
    int iterate_power_ = 1;
    bool iterate_power_explicit_ = false;
    Point base_point_;
    Box attractor_box_;
    Disk bounding_disk_;
    double diam_lo_ = 0.0, diam_hi_ = 0.0;
    bool attractor_is_interval_ = false;
    double kappa_ = 0.0;
    double step_contraction_ = 0.0;
};

// phi_I(x), evaluated map by map from the innermost symbol outward.
Point apply_word(const IfsSystem& sys, const FiniteWord& w, const Point& x);

// pi(stream) to within `tol`, by applying a long enough prefix to the base point.
Point coding_map_pi(const IfsSystem& sys, SymbolStream stream, double tol);

// Number of symbols n with C * step_contraction^n * diam K < tol.
std::size_t symbols_for_tolerance(const IfsSystem& sys, double tol);

// Empirical constants over all words up to probe_depth (word pairs for C4).
ContractionConstants contraction_constants(const IfsSystem& sys, int probe_depth);

// Stopping antichain: words I with |K_I| < rho <= |K_{I^-}|.
std::vector<FiniteWord> lambda_rho(const IfsSystem& sys, double rho, int max_depth = 64);

// Checks the open set condition with V given by the witness box (or the domain).
OscResult check_osc(const IfsSystem& sys, std::optional<Box> witness = std::nullopt);

// Diameter of K_I (upper end of the bracket).
double cylinder_diameter(const IfsSystem& sys, const FiniteWord& w);

}  // namespace confmix
