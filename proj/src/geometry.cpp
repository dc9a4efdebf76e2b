#include "confmix/geometry.hpp"

#include <algorithm>

namespace confmix {

double distance(const Point& a, const Point& b) {
    if (a.dim == 1) return std::fabs(a.c[0] - b.c[0]);
    return std::hypot(a.c[0] - b.c[0], a.c[1] - b.c[1]);
}

bool Box::contains(const Point& p, double tol) const {
    for (int i = 0; i < dim(); ++i) {
        if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
    }
    return true;
}

double Box::diameter() const {
    if (dim() == 1) return hi[0] - lo[0];
    return std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
}

Point Box::center() const {
    Point c = lo;
    for (int i = 0; i < dim(); ++i) c.c[static_cast<std::size_t>(i)] = 0.5 * (lo[i] + hi[i]);
    return c;
}

Mobius Mobius::normalized() const {
    double m = std::max({std::fabs(p), std::fabs(q), std::fabs(r), std::fabs(s)});
    if (m == 0.0) return *this;
    // Scale by a power of two so affine entries stay exact.
    int e = 0;
    std::frexp(m, &e);
    return {std::ldexp(p, -e), std::ldexp(q, -e), std::ldexp(r, -e), std::ldexp(s, -e)};
}

bool Mobius::pole_in(double lo, double hi) const {
    if (r == 0.0) return false;
    double pole = -s / r;
    return pole >= lo && pole <= hi;
}

Similarity Similarity::compose(const Similarity& o) const {
    // this(o(z)) = a * c(o.a * c'(z) + o.b) + b, with c the optional conjugation.
    Similarity out;
    if (conj) {
        out.a = a * std::conj(o.a);
        out.b = a * std::conj(o.b) + b;
    } else {
        out.a = a * o.a;
        out.b = a * o.b + b;
    }
    out.conj = conj != o.conj;
    return out;
}

Similarity Similarity::inverse() const {
    // w = a c(z) + b  =>  c(z) = (w - b) / a  =>  z = c((w - b) / a).
    Similarity out;
    std::complex<double> ia = 1.0 / a;
    if (conj) {
        out.a = std::conj(ia);
        out.b = -std::conj(ia * b);
    } else {
        out.a = ia;
        out.b = -ia * b;
    }
    out.conj = conj;
    return out;
}

double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& u = poly[i];
        const auto& v = poly[(i + 1) % poly.size()];
        twice += u.real() * v.imag() - v.real() * u.imag();
    }
    return std::fabs(0.5 * twice);
}

namespace {

double cross(std::complex<double> o, std::complex<double> a, std::complex<double> b) {
    return (a.real() - o.real()) * (b.imag() - o.imag()) - (a.imag() - o.imag()) * (b.real() - o.real());
}

double orientation(const Polygon& poly) {
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& u = poly[i];
        const auto& v = poly[(i + 1) % poly.size()];
        twice += u.real() * v.imag() - v.real() * u.imag();
    }
    return twice >= 0.0 ? 1.0 : -1.0;
}

}  // namespace

// Sutherland-Hodgman clipping of a polygon against a convex polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
    Polygon out = subject;
    double orient = orientation(clip);
    for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
        auto e0 = clip[i];
        auto e1 = clip[(i + 1) % clip.size()];
        Polygon in = std::move(out);
        out.clear();
        for (std::size_t j = 0; j < in.size(); ++j) {
            auto cur = in[j];
            auto prev = in[(j + in.size() - 1) % in.size()];
            double dc = orient * cross(e0, e1, cur);
            double dp = orient * cross(e0, e1, prev);
            if (dc >= 0.0) {
                if (dp < 0.0) out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
                out.push_back(cur);
            } else if (dp >= 0.0) {
                out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
            }
        }
    }
    return out;
}

bool polygon_contains(const Polygon& convex, std::complex<double> z, double tol) {
    double orient = orientation(convex);
    for (std::size_t i = 0; i < convex.size(); ++i) {
        auto e0 = convex[i];
        auto e1 = convex[(i + 1) % convex.size()];
        double len = std::abs(e1 - e0);
        if (orient * cross(e0, e1, z) < -tol * len) return false;
    }
    return true;
}

}  // namespace confmix
