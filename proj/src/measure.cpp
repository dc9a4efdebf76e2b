#include "confmix/measure.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace confmix {

using nlohmann::json;

RadiusFunction RadiusFunction::constant(double c) {
    RadiusFunction f;
    f.kind = Kind::Constant;
    f.c = c;
    return f;
}

RadiusFunction RadiusFunction::power(double c, double beta) {
    RadiusFunction f;
    f.kind = Kind::Power;
    f.c = c;
    f.beta = beta;
    return f;
}

RadiusFunction RadiusFunction::power_log(double alpha, double base) {
    RadiusFunction f;
    f.kind = Kind::PowerLog;
    f.alpha = alpha;
    f.base = base;
    return f;
}

RadiusFunction RadiusFunction::from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    RadiusFunction f;
    if (type == "constant") {
        f = constant(j.at("c").get<double>());
    } else if (type == "power") {
        f = power(j.value("c", 1.0), j.at("beta").get<double>());
    } else if (type == "power_log") {
        f = power_log(j.at("alpha").get<double>(), j.value("base", 3.0));
    } else {
        throw std::invalid_argument("unknown radius function type: " + type);
    }
    if (!(f.c > 0.0) || !(f.beta >= 0.0) || !(f.alpha > 0.0) || !(f.base > 1.0)) {
        throw std::invalid_argument("radius function parameters out of range");
    }
    return f;
}

json RadiusFunction::to_json() const {
    switch (kind) {
        case Kind::Constant:
            return json{{"type", "constant"}, {"c", c}};
        case Kind::Power:
            return json{{"type", "power"}, {"c", c}, {"beta", beta}};
        case Kind::PowerLog:
            return json{{"type", "power_log"}, {"alpha", alpha}, {"base", base}};
    }
    return json();
}

double RadiusFunction::operator()(std::size_t n) const {
    if (n == 0) throw std::invalid_argument("radius functions are defined for n >= 1");
    switch (kind) {
        case Kind::Constant:
            return c;
        case Kind::Power:
            return c * std::pow(static_cast<double>(n), -beta);
        case Kind::PowerLog:
            return std::pow(base, -std::floor(alpha * std::log(static_cast<double>(n))));
    }
    return 0.0;
}

namespace {

enum class Overlap { Inside, Outside, Straddle };

// Distance range from x to points of [lo, hi].
inline void interval_distance(double x, double lo, double hi, double& near, double& far) {
    far = std::max(std::fabs(lo - x), std::fabs(hi - x));
    near = (x >= lo && x <= hi) ? 0.0 : std::min(std::fabs(lo - x), std::fabs(hi - x));
}

struct BallTest {
    Point x;
    double r;
    Overlap interval(double lo, double hi) const {
        double near, far;
        interval_distance(x[0], lo, hi, near, far);
        if (far < r) return Overlap::Inside;
        if (near >= r) return Overlap::Outside;
        return Overlap::Straddle;
    }
    Overlap disk(const Disk& d) const {
        double c = distance(d.center, x);
        if (c + d.radius < r) return Overlap::Inside;
        if (c - d.radius >= r) return Overlap::Outside;
        return Overlap::Straddle;
    }
};

struct AnnulusTest {
    Point x;
    double r, rho;
    Overlap from_range(double near, double far) const {
        if (far < r + rho && near > r - rho) return Overlap::Inside;
        if (near >= r + rho || far <= r - rho) return Overlap::Outside;
        return Overlap::Straddle;
    }
    Overlap interval(double lo, double hi) const {
        double near, far;
        interval_distance(x[0], lo, hi, near, far);
        return from_range(near, far);
    }
    Overlap disk(const Disk& d) const {
        double c = distance(d.center, x);
        return from_range(std::max(0.0, c - d.radius), c + d.radius);
    }
};

struct StripBallTest {
    BallTest ball;
    Point normal;
    double offset, rho;
    Overlap strip_range(double slo, double shi) const {
        if (slo > -rho && shi < rho) return Overlap::Inside;
        if (slo >= rho || shi <= -rho) return Overlap::Outside;
        return Overlap::Straddle;
    }
    static Overlap combine(Overlap a, Overlap b) {
        if (a == Overlap::Outside || b == Overlap::Outside) return Overlap::Outside;
        if (a == Overlap::Inside && b == Overlap::Inside) return Overlap::Inside;
        return Overlap::Straddle;
    }
    Overlap interval(double lo, double hi) const {
        double a = lo * normal[0] - offset, b = hi * normal[0] - offset;
        return combine(ball.interval(lo, hi), strip_range(std::min(a, b), std::max(a, b)));
    }
    Overlap disk(const Disk& d) const {
        double s = d.center[0] * normal[0] + d.center[1] * normal[1] - offset;
        return combine(ball.disk(d), strip_range(s - d.radius, s + d.radius));
    }
};

struct WalkNode {
    CylinderMap f;
    MassCursor c;
};

template <class Test>
MeasureBracket walk(const IfsSystem& sys, const GibbsBackend& mu, const Test& test, const BracketOptions& opt) {
    if (mu.alphabet() != sys.alphabet()) throw std::invalid_argument("measure and system alphabets differ");
    thread_local std::vector<WalkNode> stack;
    stack.clear();
    const int m = sys.alphabet();
    const bool one_d = sys.dim() == 1;
    auto classify = [&](const CylinderMap& f) {
        if (one_d) {
            Interval iv = sys.cylinder_interval(f);
            return test.interval(iv.lo, iv.hi);
        }
        return test.disk(sys.cylinder_disk(f));
    };
    MeasureBracket out;
    stack.push_back({sys.identity(), mu.root()});
    while (!stack.empty()) {
        WalkNode node = stack.back();
        stack.pop_back();
        Overlap o = classify(node.f);
        if (o == Overlap::Outside) continue;
        if (o == Overlap::Inside) {
            out.lower += node.c.mass;
            out.upper += node.c.mass;
            continue;
        }
        if (node.c.depth >= opt.depth_budget || node.c.mass < opt.min_mass) {
            out.upper += node.c.mass;
            continue;
        }
        for (int j = m - 1; j >= 0; --j) {
            MassCursor cc = mu.child(node.c, j);
            if (cc.mass <= 0.0) continue;
            stack.push_back({sys.extend(node.f, j), cc});
        }
    }
    out.upper = std::min(out.upper, 1.0);
    out.lower = std::min(out.lower, out.upper);
    return out;
}

}  // namespace

bool has_exact_balls(const IfsSystem& sys, const GibbsBackend& mu) {
    return mu.kind() == GibbsBackend::Kind::Density && sys.dim() == 1 && sys.attractor_is_interval();
}

MeasureBracket ball_measure(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                            const BracketOptions& opt) {
    if (!(r >= 0.0)) throw std::invalid_argument("ball radius must be non-negative");
    if (x.dim != sys.dim()) throw std::invalid_argument("point dimension does not match the system");
    if (r == 0.0) return {0.0, 0.0};
    if (has_exact_balls(sys, mu)) {
        double v = mu.interval_mass(x[0] - r, x[0] + r);
        return {v, v};
    }
    return walk(sys, mu, BallTest{x, r}, opt);
}

MeasureBracket annulus_measure(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r, double rho,
                               const BracketOptions& opt) {
    if (!(r > 0.0) || !(rho > 0.0)) throw std::invalid_argument("annulus needs r > 0 and rho > 0");
    return walk(sys, mu, AnnulusTest{x, r, rho}, opt);
}

MeasureBracket strip_ball_measure(const IfsSystem& sys, const GibbsBackend& mu, const StripBallRegion& region,
                                  const BracketOptions& opt) {
    if (!(region.rho > 0.0)) throw std::invalid_argument("strip half-width must be positive");
    return walk(sys, mu, StripBallTest{BallTest{region.center, region.radius}, region.normal, region.offset, region.rho},
                opt);
}

TnResult t_n_search(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double psi, double tol,
                    const BracketOptions& opt, int max_iter) {
    if (!(psi > 0.0)) throw std::invalid_argument("psi must be positive");
    TnResult out;
    const double diam = sys.diameter_hi();
    if (psi >= 1.0) {
        out.radius = out.lo = diam;
        out.certified = true;
        out.last = {1.0, 1.0};
        return out;
    }
    double lo = 0.0, hi = diam * (1.0 + 1e-9) + 1e-300;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        BracketOptions o = opt;
        MeasureBracket b = ball_measure(sys, mu, x, mid, o);
        for (int retry = 0; retry < 3 && b.lower < psi && b.upper >= psi; ++retry) {
            o.depth_budget += 24;
            o.min_mass /= 64.0;
            b = ball_measure(sys, mu, x, mid, o);
        }
        out.iterations = it + 1;
        out.last = b;
        if (b.lower >= psi) {
            hi = mid;
        } else if (b.upper < psi) {
            lo = mid;
        } else {
            out.radius = hi;
            out.lo = lo;
            out.certified = false;
            return out;
        }
    }
    out.radius = hi;
    out.lo = lo;
    out.certified = hi - lo <= tol;
    return out;
}

double t_n_radius(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double psi, double tol,
                  const BracketOptions& opt) {
    TnResult r = t_n_search(sys, mu, x, psi, tol, opt);
    if (!r.certified) {
        throw std::runtime_error("t_n bisection could not certify: bracket [" + std::to_string(r.last.lower) + ", " +
                                 std::to_string(r.last.upper) + "] around psi = " + std::to_string(psi));
    }
    return r.radius;
}

DensityRatioSeries density_ratio_series(const IfsSystem& sys, const GibbsBackend& mu, const Point& x,
                                        const RadiusFunction& psi, double tau, std::size_t N,
                                        const BracketOptions& opt) {
    DensityRatioSeries out;
    out.ratio.reserve(N);
    std::map<double, MeasureBracket> cache;
    out.running_min = INFINITY;
    out.running_max = -INFINITY;
    for (std::size_t n = 1; n <= N; ++n) {
        double r = psi(n);
        auto it = cache.find(r);
        if (it == cache.end()) it = cache.emplace(r, ball_measure(sys, mu, x, r, opt)).first;
        const MeasureBracket& b = it->second;
        double scale = std::pow(r, tau);
        double ratio = b.mid() / scale;
        out.ratio.push_back(ratio);
        out.width.push_back(b.width() / scale);
        out.uncertain.push_back(b.width() > 1e-3 * b.mid());
        out.running_min = std::min(out.running_min, ratio);
        out.running_max = std::max(out.running_max, ratio);
    }
    return out;
}

double hyperplane_decay_probe(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                              const Point& normal, double offset, double rho, const BracketOptions& opt) {
    MeasureBracket ball = ball_measure(sys, mu, x, r, opt);
    if (!(ball.lower > 0.0)) throw std::domain_error("ball bracket contains 0; the ratio is undefined");
    MeasureBracket strip = strip_ball_measure(sys, mu, StripBallRegion{x, r, normal, offset, rho}, opt);
    return strip.mid() / ball.mid();
}

DoublingRatio doubling_ratio(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, double r,
                             const BracketOptions& opt) {
    MeasureBracket small = ball_measure(sys, mu, x, r, opt);
    MeasureBracket big = ball_measure(sys, mu, x, 2.0 * r, opt);
    DoublingRatio out;
    out.ratio = big.mid() / small.mid();
    out.lower = small.upper > 0.0 ? big.lower / small.upper : INFINITY;
    out.upper = small.lower > 0.0 ? big.upper / small.lower : INFINITY;
    return out;
}

}  // namespace confmix
