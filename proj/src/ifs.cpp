#include "confmix/ifs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace confmix {

using nlohmann::json;

ConformalMap::ConformalMap(Affine1D m) : params_(m), mobius_{m.a, m.b, 0.0, 1.0} {
    if (!(std::isfinite(m.a) && std::isfinite(m.b)) || m.a == 0.0) {
        throw std::invalid_argument("affine map needs finite a != 0");
    }
}

ConformalMap::ConformalMap(Moebius1D m) : params_(m), mobius_{m.p, m.q, m.r, m.s} {
    if (!(std::isfinite(m.p) && std::isfinite(m.q) && std::isfinite(m.r) && std::isfinite(m.s))) {
        throw std::invalid_argument("Moebius map needs finite coefficients");
    }
    if (mobius_.det() == 0.0) throw std::invalid_argument("Moebius map is degenerate (ps - qr = 0)");
}

ConformalMap::ConformalMap(Similarity2D m) : params_(m) {
    if (!(m.scale > 0.0) || !std::isfinite(m.scale)) throw std::invalid_argument("similarity scale must be positive");
    similarity_.a = std::polar(m.scale, m.rotation);
    similarity_.b = {m.tx, m.ty};
    similarity_.conj = m.reflect;
}

Point ConformalMap::apply(const Point& x) const {
    if (dim() == 1) return Point::d1(mobius_(x.c[0]));
    return Point::from_z(similarity_(x.z()));
}

double ConformalMap::derivative_norm(const Point& x) const {
    if (dim() == 1) return std::fabs(mobius_.derivative(x.c[0]));
    return similarity_.scale();
}

double ConformalMap::secant_ratio(const Point& u, const Point& v) const {
    if (dim() == 1) return mobius_.secant_ratio(u.c[0], v.c[0]);
    return similarity_.scale();
}

Point ConformalMap::inverse(const Point& y) const {
    if (dim() == 1) return Point::d1(mobius_.inverse()(y.c[0]));
    return Point::from_z(similarity_.inverse()(y.z()));
}

namespace {

Box box_from_json(const json& j, int dim, const char* what) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(2 * dim)) {
        throw std::invalid_argument(std::string(what) + " must be an array [lo..., hi...] of length 2*dim");
    }
    Box b{Point{dim, {0, 0}}, Point{dim, {0, 0}}};
    for (int i = 0; i < dim; ++i) {
        b.lo.c[static_cast<std::size_t>(i)] = j.at(static_cast<std::size_t>(i)).get<double>();
        b.hi.c[static_cast<std::size_t>(i)] = j.at(static_cast<std::size_t>(dim + i)).get<double>();
        if (!(b.lo[i] < b.hi[i])) throw std::invalid_argument(std::string(what) + " has lo >= hi");
    }
    return b;
}

json box_to_json(const Box& b) {
    json out = json::array();
    for (int i = 0; i < b.dim(); ++i) out.push_back(b.lo[i]);
    for (int i = 0; i < b.dim(); ++i) out.push_back(b.hi[i]);
    return out;
}

Polygon box_polygon(const Box& b) {
    return {{b.lo[0], b.lo[1]}, {b.hi[0], b.lo[1]}, {b.hi[0], b.hi[1]}, {b.lo[0], b.hi[1]}};
}

}  // namespace

IfsSystem::IfsSystem(std::vector<ConformalMap> maps, std::optional<Box> domain, std::optional<Box> osc_witness,
                     int iterate_power, std::string name)
    : name_(std::move(name)), maps_(std::move(maps)), osc_witness_(std::move(osc_witness)) {
    if (maps_.size() < 2) throw std::invalid_argument("an IFS needs at least two maps");
    if (maps_.size() > static_cast<std::size_t>(kMaxAlphabet)) throw std::invalid_argument("too many maps");
    dim_ = maps_[0].dim();
    for (const auto& m : maps_) {
        if (m.dim() != dim_) throw std::invalid_argument("maps of different dimensions");
    }
    if (iterate_power < 0 || iterate_power > 8) throw std::invalid_argument("iterate_power must be in 0..8");
    iterate_power_ = iterate_power;
    iterate_power_explicit_ = iterate_power > 0;
    domain_given_ = domain.has_value();
    if (domain) {
        domain_ = *domain;
    } else if (osc_witness_) {
        domain_ = *osc_witness_;
    } else {
        domain_ = Box{Point{dim_, {0, 0}}, Point{dim_, {0, 0}}};
        domain_.lo.dim = 0;  // marks "to be computed"
    }
    if (domain_.lo.dim != 0 && domain_.dim() != dim_) throw std::invalid_argument("domain dimension mismatch");
    if (osc_witness_ && osc_witness_->dim() != dim_) throw std::invalid_argument("osc_witness dimension mismatch");
    analyse();
}

void IfsSystem::analyse() {
    const int m = alphabet();
    if (dim_ == 1) {
        for (const auto& f : maps_) {
            if (std::holds_alternative<Moebius1D>(f.params()) && f.mobius().r != 0.0 && domain_.lo.dim == 0) {
                throw std::invalid_argument("Moebius systems need a domain or osc_witness box");
            }
        }
    }
    if (domain_.lo.dim == 0) {
        // Affine or similarity maps: grow an invariant box from the fixed points.
        if (dim_ == 1) {
            double lo = INFINITY, hi = -INFINITY;
            for (const auto& f : maps_) {
                const auto& mb = f.mobius();
                if (std::fabs(mb.p) >= 1.0) throw std::invalid_argument("affine map is not a contraction");
                double fp = mb.q / (1.0 - mb.p);
                lo = std::min(lo, fp);
                hi = std::max(hi, fp);
            }
            for (int it = 0; it < 200; ++it) {
                double nlo = lo, nhi = hi;
                for (const auto& f : maps_) {
                    double a = f.mobius()(lo), b = f.mobius()(hi);
                    nlo = std::min({nlo, a, b});
                    nhi = std::max({nhi, a, b});
                }
                if (nlo == lo && nhi == hi) break;
                lo = nlo;
                hi = nhi;
            }
            if (hi <= lo) hi = lo + 1.0;
            domain_ = Box{Point::d1(lo), Point::d1(hi)};
        } else {
            std::complex<double> c{0, 0};
            for (const auto& f : maps_) {
                const auto& s = f.similarity();
                if (s.scale() >= 1.0) throw std::invalid_argument("similarity is not a contraction");
                c += s.conj ? s(c) : s.b / (1.0 - s.a);
            }
            c /= static_cast<double>(m);
            double R = 0.0;
            for (const auto& f : maps_) {
                const auto& s = f.similarity();
                R = std::max(R, std::abs(s(c) - c) / (1.0 - s.scale()));
            }
            R = std::max(R, 1e-300);
            domain_ = Box{Point::d2(c.real() - R, c.imag() - R), Point::d2(c.real() + R, c.imag() + R)};
        }
    }

    // Maps must send the domain into itself, without poles.
    const double tol = 1e-12 * std::max(1.0, domain_.diameter());
    for (int j = 0; j < m; ++j) {
        const auto& f = maps_[static_cast<std::size_t>(j)];
        if (dim_ == 1) {
            if (f.mobius().pole_in(domain_.lo[0], domain_.hi[0])) {
                throw std::invalid_argument("map " + std::to_string(j + 1) + " has a pole in the domain");
            }
            double a = f.mobius()(domain_.lo[0]), b = f.mobius()(domain_.hi[0]);
            if (std::min(a, b) < domain_.lo[0] - tol || std::max(a, b) > domain_.hi[0] + tol) {
                throw std::invalid_argument("map " + std::to_string(j + 1) + " does not send the domain into itself");
            }
        }
    }

    kappa_ = 0.0;
    for (const auto& f : maps_) {
        if (dim_ == 1) {
            kappa_ = std::max({kappa_, f.derivative_norm(domain_.lo), f.derivative_norm(domain_.hi)});
        } else {
            kappa_ = std::max(kappa_, f.similarity().scale());
        }
    }

    // Smallest n0 such that every word of length n0 contracts on the domain.
    auto sup_over_words = [&](int n) {
        double worst = 0.0;
        std::vector<std::pair<CylinderMap, int>> stack{{identity(), 0}};
        while (!stack.empty()) {
            auto [f, d] = stack.back();
            stack.pop_back();
            if (d == n) {
                worst = std::max(worst, derivative_range(f).hi);
                continue;
            }
            for (int j = 0; j < m; ++j) stack.push_back({extend(f, j), d + 1});
        }
        return worst;
    };
    if (iterate_power_explicit_) {
        double s = sup_over_words(iterate_power_);
        if (!(s < 1.0)) {
            throw std::invalid_argument("compositions of length iterate_power do not contract (sup |phi_I'| = " +
                                        std::to_string(s) + ")");
        }
        step_contraction_ = std::pow(s, 1.0 / iterate_power_);
    } else {
        iterate_power_ = 0;
        for (int n = 1; n <= 8 && std::pow(static_cast<double>(m), n) <= 1 << 20; ++n) {
            double s = sup_over_words(n);
            if (s < 1.0) {
                iterate_power_ = n;
                step_contraction_ = std::pow(s, 1.0 / n);
                break;
            }
        }
        if (iterate_power_ == 0) throw std::invalid_argument("system is not eventually contracting (n0 <= 8)");
    }

    // Base point: fixed point of phi_1.
    {
        const auto& f = maps_[0];
        if (dim_ == 1) {
            double x = domain_.center()[0];
            for (int it = 0; it < 100000; ++it) {
                double nx = f.mobius()(x);
                if (nx == x) break;
                x = nx;
            }
            base_point_ = Point::d1(x);
        } else {
            const auto& s = f.similarity();
            std::complex<double> z = domain_.center().z();
            if (!s.conj) {
                z = s.b / (1.0 - s.a);
            } else {
                for (int it = 0; it < 10000; ++it) z = s(z);
            }
            base_point_ = Point::from_z(z);
        }
    }

    if (dim_ == 1) {
        double lo = domain_.lo[0], hi = domain_.hi[0];
        for (int it = 0; it < 100000; ++it) {
            double nlo = INFINITY, nhi = -INFINITY;
            for (const auto& f : maps_) {
                double a = f.mobius()(lo), b = f.mobius()(hi);
                nlo = std::min({nlo, a, b});
                nhi = std::max({nhi, a, b});
            }
            if (nlo == lo && nhi == hi) break;
            lo = nlo;
            hi = nhi;
        }
        attractor_box_ = Box{Point::d1(lo), Point::d1(hi)};
        bounding_disk_ = Disk{Point::d1(0.5 * (lo + hi)), 0.5 * (hi - lo)};
        diam_lo_ = diam_hi_ = hi - lo;
        double covered = 0.0;
        std::vector<Interval> parts;
        for (const auto& f : maps_) {
            double a = f.mobius()(lo), b = f.mobius()(hi);
            parts.push_back({std::min(a, b), std::max(a, b)});
            covered += f.mobius().image_width(lo, hi);
        }
        std::sort(parts.begin(), parts.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
        bool disjoint = true;
        for (std::size_t i = 1; i < parts.size(); ++i) disjoint = disjoint && parts[i].lo >= parts[i - 1].hi - 1e-15;
        attractor_is_interval_ = disjoint && std::fabs(covered - (hi - lo)) <= 1e-12 * (hi - lo);
    } else {
        // Centre the disk at the mean of the fixed points; any R with
        // |phi_j(c) - c| + s_j R <= R for all j gives an invariant disk.
        std::complex<double> c{0, 0};
        for (const auto& f : maps_) {
            const auto& s = f.similarity();
            std::complex<double> z = domain_.center().z();
            if (!s.conj) {
                z = s.b / (1.0 - s.a);
            } else {
                for (int it = 0; it < 10000; ++it) z = s(z);
            }
            c += z;
        }
        c /= static_cast<double>(m);
        double R = 0.0;
        for (const auto& f : maps_) {
            const auto& s = f.similarity();
            R = std::max(R, std::abs(s(c) - c) / (1.0 - s.scale()));
        }
        bounding_disk_ = Disk{Point::from_z(c), R};
        // Points of K (images of the base point) and covering disks at a fixed depth.
        int depth = 1;
        while (std::pow(static_cast<double>(m), depth + 1) <= 800) ++depth;
        std::vector<std::complex<double>> pts;
        double max_r = 0.0;
        double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
        std::vector<std::pair<CylinderMap, int>> stack{{identity(), 0}};
        while (!stack.empty()) {
            auto [f, d] = stack.back();
            stack.pop_back();
            if (d == depth) {
                pts.push_back(f.sim(base_point_.z()));
                Disk dk = cylinder_disk(f);
                max_r = std::max(max_r, dk.radius);
                xlo = std::min(xlo, dk.center[0] - dk.radius);
                xhi = std::max(xhi, dk.center[0] + dk.radius);
                ylo = std::min(ylo, dk.center[1] - dk.radius);
                yhi = std::max(yhi, dk.center[1] + dk.radius);
                continue;
            }
            for (int j = 0; j < m; ++j) stack.push_back({extend(f, j), d + 1});
        }
        double dl = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t k = i + 1; k < pts.size(); ++k) dl = std::max(dl, std::abs(pts[i] - pts[k]));
        }
        diam_lo_ = dl;
        diam_hi_ = std::min(2.0 * R, dl + 2.0 * max_r);
        attractor_box_ = Box{Point::d2(xlo, ylo), Point::d2(xhi, yhi)};
        attractor_is_interval_ = false;
    }
}

CylinderMap IfsSystem::identity() const { return CylinderMap{}; }

CylinderMap IfsSystem::extend(const CylinderMap& parent, int j) const {
    CylinderMap out;
    const auto& f = maps_[static_cast<std::size_t>(j)];
    if (dim_ == 1) {
        out.mob = parent.mob.compose(f.mobius()).normalized();
    } else {
        out.sim = parent.sim.compose(f.similarity());
    }
    return out;
}

CylinderMap IfsSystem::compose_word(const FiniteWord& w) const {
    w.validate(alphabet());
    CylinderMap f = identity();
    for (Symbol s : w.symbols()) f = extend(f, s);
    return f;
}

Point IfsSystem::apply_cylinder(const CylinderMap& f, const Point& x) const {
    if (dim_ == 1) return Point::d1(f.mob(x[0]));
    return Point::from_z(f.sim(x.z()));
}

Interval IfsSystem::cylinder_interval(const CylinderMap& f) const {
    double a = f.mob(attractor_box_.lo[0]);
    double b = f.mob(attractor_box_.hi[0]);
    return a <= b ? Interval{a, b} : Interval{b, a};
}

Disk IfsSystem::cylinder_disk(const CylinderMap& f) const {
    return Disk{Point::from_z(f.sim(bounding_disk_.center.z())), f.sim.scale() * bounding_disk_.radius};
}

Interval IfsSystem::cylinder_diameter(const CylinderMap& f) const {
    if (dim_ == 1) {
        double w = f.mob.image_width(attractor_box_.lo[0], attractor_box_.hi[0]);
        return {w, w};
    }
    double s = f.sim.scale();
    return {s * diam_lo_, s * diam_hi_};
}

Interval IfsSystem::derivative_range(const CylinderMap& f) const {
    if (dim_ == 1) {
        double a = std::fabs(f.mob.derivative(domain_.lo[0]));
        double b = std::fabs(f.mob.derivative(domain_.hi[0]));
        return {std::min(a, b), std::max(a, b)};
    }
    double s = f.sim.scale();
    return {s, s};
}

namespace {

json map_to_json(const ConformalMap& f) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Affine1D>) {
                return json{{"type", "affine1d"}, {"a", p.a}, {"b", p.b}};
            } else if constexpr (std::is_same_v<T, Moebius1D>) {
                return json{{"type", "moebius1d"}, {"p", p.p}, {"q", p.q}, {"r", p.r}, {"s", p.s}};
            } else {
                return json{{"type", "sim2d"},
                            {"scale", p.scale},
                            {"rotation", p.rotation},
                            {"reflect", p.reflect},
                            {"translation", json::array({p.tx, p.ty})}};
            }
        },
        f.params());
}

ConformalMap map_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type")) throw std::invalid_argument("map entry needs a \"type\"");
    const std::string type = j.at("type").get<std::string>();
    if (type == "affine1d") return ConformalMap(Affine1D{j.at("a").get<double>(), j.at("b").get<double>()});
    if (type == "moebius1d") {
        return ConformalMap(Moebius1D{j.at("p").get<double>(), j.at("q").get<double>(), j.at("r").get<double>(),
                                      j.at("s").get<double>()});
    }
    if (type == "sim2d") {
        Similarity2D s;
        s.scale = j.at("scale").get<double>();
        s.rotation = j.value("rotation", 0.0);
        s.reflect = j.value("reflect", false);
        const auto& t = j.at("translation");
        if (!t.is_array() || t.size() != 2) throw std::invalid_argument("sim2d translation must be [tx, ty]");
        s.tx = t[0].get<double>();
        s.ty = t[1].get<double>();
        return ConformalMap(s);
    }
    throw std::invalid_argument("unknown map type: " + type);
}

}  // namespace

IfsSystem IfsSystem::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("system spec must be a JSON object");
    if (j.contains("builtin")) return builtin(j.at("builtin").get<std::string>());
    const int dim = j.at("dim").get<int>();
    if (dim != 1 && dim != 2) throw std::invalid_argument("dim must be 1 or 2");
    const auto& jm = j.at("maps");
    if (!jm.is_array()) throw std::invalid_argument("\"maps\" must be an array");
    std::vector<ConformalMap> maps;
    for (const auto& e : jm) {
        maps.push_back(map_from_json(e));
        if (maps.back().dim() != dim) throw std::invalid_argument("map type does not match dim");
    }
    std::optional<Box> domain, witness;
    if (j.contains("domain")) domain = box_from_json(j.at("domain"), dim, "domain");
    if (j.contains("osc_witness")) witness = box_from_json(j.at("osc_witness"), dim, "osc_witness");
    int n0 = j.value("iterate_power", 0);
    return IfsSystem(std::move(maps), domain, witness, n0, j.value("name", std::string()));
}

json IfsSystem::to_json() const {
    json j;
    if (!name_.empty()) j["name"] = name_;
    j["dim"] = dim_;
    j["maps"] = json::array();
    for (const auto& f : maps_) j["maps"].push_back(map_to_json(f));
    if (domain_given_) j["domain"] = box_to_json(domain_);
    if (osc_witness_) j["osc_witness"] = box_to_json(*osc_witness_);
    if (iterate_power_explicit_) j["iterate_power"] = iterate_power_;
    return j;
}

std::vector<std::string> IfsSystem::builtin_names() {
    return {"cantor", "example_7_2", "remark_7_2", "sierpinski", "two_line_cantor"};
}

IfsSystem IfsSystem::builtin(const std::string& name) {
    const Box unit{Point::d1(0.0), Point::d1(1.0)};
    if (name == "cantor") {
        return IfsSystem({Affine1D{1.0 / 3.0, 0.0}, Affine1D{1.0 / 3.0, 2.0 / 3.0}}, std::nullopt, unit, 0, name);
    }
    if (name == "example_7_2") {
        return IfsSystem({Affine1D{0.25, 0.0}, Moebius1D{0.0, 1.0, 2.0, 2.0}, Moebius1D{1.0, 1.0, 1.0, 2.0},
                          Moebius1D{0.0, 2.0, 1.0, 2.0}},
                         std::nullopt, unit, 0, name);
    }
    if (name == "remark_7_2") {
        return IfsSystem({Affine1D{0.5, 0.0}, Moebius1D{0.0, 1.0, 1.0, 1.0}}, std::nullopt, unit, 0, name);
    }
    if (name == "sierpinski") {
        const double h = std::sqrt(3.0) / 2.0;
        Box witness{Point::d2(0.0, 0.0), Point::d2(1.0, h)};
        return IfsSystem({Similarity2D{0.5, 0.0, false, 0.0, 0.0}, Similarity2D{0.5, 0.0, false, 0.5, 0.0},
                          Similarity2D{0.5, 0.0, false, 0.25, h / 2.0}},
                         std::nullopt, witness, 0, name);
    }
    if (name == "two_line_cantor") {
        Box witness{Point::d2(-1.0, -1.0), Point::d2(1.0, 1.0)};
        return IfsSystem({Similarity2D{1.0 / 3.0, 0.0, false, 0.0, -2.0 / 3.0},
                          Similarity2D{1.0 / 3.0, 0.0, false, 0.0, 2.0 / 3.0}},
                         std::nullopt, witness, 0, name);
    }
    throw std::invalid_argument("unknown builtin system: " + name);
}

Point apply_word(const IfsSystem& sys, const FiniteWord& w, const Point& x) {
    w.validate(sys.alphabet());
    if (x.dim != sys.dim()) throw std::invalid_argument("point dimension does not match the system");
    Point y = x;
    for (std::size_t i = w.size(); i-- > 0;) y = sys.map(w[i]).apply(y);
    return y;
}

std::size_t symbols_for_tolerance(const IfsSystem& sys, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const int n0 = sys.iterate_power();
    const double rho = sys.step_contraction();
    // Words shorter than n0 can expand by at most max(1, kappa)^n0 relative to rho^n.
    double pre = std::pow(std::max(1.0, sys.kappa()) / rho, n0);
    double diam = std::max(sys.domain().diameter(), 1e-300);
    double n = std::ceil(std::log(tol / (pre * diam)) / std::log(rho));
    return static_cast<std::size_t>(std::max(1.0, n)) + static_cast<std::size_t>(n0);
}

Point coding_map_pi(const IfsSystem& sys, SymbolStream stream, double tol) {
    if (stream.alphabet() != sys.alphabet()) throw std::invalid_argument("stream alphabet does not match the system");
    std::size_t n = symbols_for_tolerance(sys, tol);
    FiniteWord w = stream.read(n);
    return apply_word(sys, w, sys.base_point());
}

ContractionConstants contraction_constants(const IfsSystem& sys, int probe_depth) {
    if (probe_depth < 1 || probe_depth > 24) throw std::invalid_argument("probe_depth must be in 1..24");
    const int m = sys.alphabet();
    if (std::pow(static_cast<double>(m), probe_depth) > 4e6) throw std::invalid_argument("probe_depth too large");
    ContractionConstants out;
    out.kappa = sys.kappa();
    out.probe_depth = probe_depth;
    if (!(out.kappa < 1.0) && sys.iterate_power() == 1) throw std::invalid_argument("system is not contracting");

    struct Node {
        CylinderMap f;
        int depth;
        double diam;
    };
    std::vector<Node> nodes;
    std::vector<std::pair<CylinderMap, int>> stack{{sys.identity(), 0}};
    const double a = sys.attractor_box().lo[0], b = sys.attractor_box().hi[0];
    while (!stack.empty()) {
        auto [f, d] = stack.back();
        stack.pop_back();
        if (d > 0) {
            Interval dr = sys.derivative_range(f);
            double diam = sys.cylinder_diameter(f).hi;
            out.C1 = std::max(out.C1, dr.hi / dr.lo);
            if (sys.dim() == 1) {
                // ||phi_I'|| |x - y| <= C2 |phi_I x - phi_I y| on the hull endpoints.
                out.C2 = std::max(out.C2, dr.hi * (b - a) / f.mob.image_width(a, b));
            }
            out.C3 = std::max({out.C3, diam / dr.hi, dr.hi / diam, diam / std::pow(out.kappa, d)});
            nodes.push_back({f, d, diam});
        }
        if (d < probe_depth) {
            for (int j = 0; j < m; ++j) stack.push_back({sys.extend(f, j), d + 1});
        }
    }
    out.C3 = std::max(out.C3, sys.diameter_hi() > 1.0 ? sys.diameter_hi() : 1.0);
    for (const auto& u : nodes) {
        for (const auto& v : nodes) {
            CylinderMap uv;
            if (sys.dim() == 1) {
                uv.mob = u.f.mob.compose(v.f.mob).normalized();
            } else {
                uv.sim = u.f.sim.compose(v.f.sim);
            }
            double d = sys.cylinder_diameter(uv).hi;
            double prod = u.diam * v.diam;
            out.C4 = std::max({out.C4, d / prod, prod / d});
        }
    }
    return out;
}

double cylinder_diameter(const IfsSystem& sys, const FiniteWord& w) {
    return sys.cylinder_diameter(sys.compose_word(w)).hi;
}

std::vector<FiniteWord> lambda_rho(const IfsSystem& sys, double rho, int max_depth) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    std::vector<FiniteWord> out;
    struct Item {
        CylinderMap f;
        FiniteWord w;
    };
    std::vector<Item> stack{{sys.identity(), FiniteWord()}};
    const int m = sys.alphabet();
    while (!stack.empty()) {
        Item it = std::move(stack.back());
        stack.pop_back();
        if (sys.cylinder_diameter(it.f).hi < rho) {
            out.push_back(std::move(it.w));
            continue;
        }
        if (static_cast<int>(it.w.size()) >= max_depth) throw std::invalid_argument("lambda_rho exceeded max_depth");
        for (int j = m - 1; j >= 0; --j) {
            FiniteWord child = it.w;
            child.push_back(static_cast<Symbol>(j));
            stack.push_back({sys.extend(it.f, j), std::move(child)});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

OscResult check_osc(const IfsSystem& sys, std::optional<Box> witness) {
    Box V = witness ? *witness : (sys.osc_witness() ? *sys.osc_witness() : sys.domain());
    if (V.dim() != sys.dim()) throw std::invalid_argument("witness dimension mismatch");
    OscResult out;
    out.images_inside = true;
    const int m = sys.alphabet();
    const double tol = 1e-12 * std::max(1.0, V.diameter());
    if (sys.dim() == 1) {
        std::vector<Interval> img;
        for (int j = 0; j < m; ++j) {
            const auto& f = sys.map(j).mobius();
            if (f.pole_in(V.lo[0], V.hi[0])) {
                out.images_inside = false;
                continue;
            }
            double a = f(V.lo[0]), b = f(V.hi[0]);
            img.push_back({std::min(a, b), std::max(a, b)});
            if (img.back().lo < V.lo[0] - tol || img.back().hi > V.hi[0] + tol) out.images_inside = false;
        }
        for (std::size_t i = 0; i < img.size(); ++i) {
            for (std::size_t k = i + 1; k < img.size(); ++k) {
                double ov = std::min(img[i].hi, img[k].hi) - std::max(img[i].lo, img[k].lo);
                out.max_overlap = std::max(out.max_overlap, ov);
            }
        }
    } else {
        Polygon v = box_polygon(V);
        std::vector<Polygon> img;
        for (int j = 0; j < m; ++j) {
            Polygon p;
            for (auto z : v) {
                p.push_back(sys.map(j).similarity()(z));
                if (!V.contains(Point::from_z(p.back()), tol)) out.images_inside = false;
            }
            img.push_back(std::move(p));
        }
        for (std::size_t i = 0; i < img.size(); ++i) {
            for (std::size_t k = i + 1; k < img.size(); ++k) {
                out.max_overlap = std::max(out.max_overlap, polygon_area(clip_convex(img[i], img[k])));
            }
        }
    }
    out.holds = out.images_inside && out.max_overlap < 1e-12;
    return out;
}

}  // namespace confmix
