#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace confmix {

// Point in R^1 or R^2.
struct Point {
    int dim = 1;
    std::array<double, 2> c{0.0, 0.0};

    static Point d1(double x) { return Point{1, {x, 0.0}}; }
    static Point d2(double x, double y) { return Point{2, {x, y}}; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    std::complex<double> z() const { return {c[0], c[1]}; }
    static Point from_z(std::complex<double> z) { return d2(z.real(), z.imag()); }
};

double distance(const Point& a, const Point& b);

struct Box {
    Point lo;
    Point hi;
    int dim() const { return lo.dim; }
    bool contains(const Point& p, double tol = 0.0) const;
    double diameter() const;
    Point center() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

struct Disk {
    Point center;
    double radius = 0.0;
};

// x -> (p x + q) / (r x + s). Affine maps have r = 0, s = 1.
struct Mobius {
    double p = 1.0, q = 0.0, r = 0.0, s = 1.0;

    double operator()(double x) const { return (p * x + q) / (r * x + s); }
    double det() const { return p * s - q * r; }
    double derivative(double x) const {
        double d = r * x + s;
        return det() / (d * d);
    }
    // |phi(u) - phi(v)| / |u - v|, computed without cancellation.
    double secant_ratio(double u, double v) const { return std::fabs(det() / ((r * u + s) * (r * v + s))); }
    // |phi(b) - phi(a)| computed without cancellation.
    double image_width(double a, double b) const { return std::fabs(b - a) * secant_ratio(a, b); }
    // this o other
    Mobius compose(const Mobius& o) const {
        return {p * o.p + q * o.r, p * o.q + q * o.s, r * o.p + s * o.r, r * o.q + s * o.s};
    }
    Mobius inverse() const { return {s, -q, -r, p}; }
    // Rescales so the largest entry has magnitude 1; the map is unchanged.
    Mobius normalized() const;
    bool pole_in(double lo, double hi) const;
};

// z -> a * z + b, or a * conj(z) + b when `conj` is set.
struct Similarity {
    std::complex<double> a{1.0, 0.0};
    std::complex<double> b{0.0, 0.0};
    bool conj = false;

    std::complex<double> operator()(std::complex<double> z) const { return a * (conj ? std::conj(z) : z) + b; }
    double scale() const { return std::abs(a); }
    Similarity compose(const Similarity& o) const;
    Similarity inverse() const;
};

// Convex polygon utilities for 2-D open set condition checks.
using Polygon = std::vector<std::complex<double>>;
double polygon_area(const Polygon& poly);
Polygon clip_convex(const Polygon& subject, const Polygon& clip);
bool polygon_contains(const Polygon& convex, std::complex<double> z, double tol);

}  // namespace confmix
