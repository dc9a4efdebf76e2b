#include "confmix/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confmix {

namespace {

// Continues a mu-distributed sequence: each symbol is drawn from the
// backend's conditional law given the symbols so far.
class ChainTail final : public TailSource {
public:
    ChainTail(const GibbsBackend& backend, CounterRng rng)
        : backend_(&backend), rng_(rng), cursor_(backend.root()), probs_(static_cast<std::size_t>(backend.alphabet())) {}

    Symbol next() override {
        const int m = backend_->alphabet();
        backend_->conditionals(cursor_, probs_.data());
        const double u = rng_.uniform();
        double acc = 0.0;
        int s = m - 1;
        for (int j = 0; j < m; ++j) {
            acc += probs_[static_cast<std::size_t>(j)];
            if (u < acc) {
                s = j;
                break;
            }
        }
        // Bernoulli conditionals never change; skip the cursor update.
        if (backend_->kind() != GibbsBackend::Kind::Bernoulli) cursor_ = backend_->child(cursor_, s);
        return static_cast<Symbol>(s);
    }

    std::unique_ptr<TailSource> clone() const override { return std::make_unique<ChainTail>(*this); }

private:
    const GibbsBackend* backend_;
    CounterRng rng_;
    MassCursor cursor_;
    std::vector<double> probs_;
};

}  // namespace

std::vector<Symbol> MuSampler::draw(std::size_t n) const {
    ChainTail tail(*backend_, CounterRng(seed_, stream_));
    std::vector<Symbol> out(n);
    for (auto& s : out) s = tail.next();
    return out;
}

SymbolStream MuSampler::stream_of(std::size_t prefix_depth) const {
    auto tail = std::make_unique<ChainTail>(*backend_, CounterRng(seed_, stream_));
    std::vector<Symbol> prefix(prefix_depth);
    for (auto& s : prefix) s = tail->next();
    return SymbolStream::random(backend_->alphabet(), FiniteWord(std::move(prefix)), std::move(tail));
}

SymbolStream sample_mu(const MuSampler& sampler, std::size_t prefix_depth) { return sampler.stream_of(prefix_depth); }

Point t_apply(const IfsSystem& sys, const Point& x, double tol) {
    if (x.dim != sys.dim()) throw std::invalid_argument("point dimension does not match the system");
    const int m = sys.alphabet();
    for (int i = 0; i < m; ++i) {
        bool inside;
        if (sys.dim() == 1) {
            Interval iv = sys.cylinder_interval(sys.extend(sys.identity(), i));
            inside = x[0] >= iv.lo - tol && x[0] <= iv.hi + tol;
        } else {
            const Box& b = sys.attractor_box();
            const Similarity& f = sys.map(i).similarity();
            Polygon hull{f({b.lo[0], b.lo[1]}), f({b.hi[0], b.lo[1]}), f({b.hi[0], b.hi[1]}), f({b.lo[0], b.hi[1]})};
            // Reflections reverse the orientation of the image.
            if (f.conj) std::reverse(hull.begin(), hull.end());
            inside = polygon_contains(hull, x.z(), tol);
        }
        if (inside) return sys.map(i).inverse(x);
    }
    throw std::domain_error("point is not within tolerance of any first-level cylinder");
}

SampledOrbit::SampledOrbit(const IfsSystem& sys, std::vector<Symbol> symbols, std::size_t N, double tol)
    : sys_(&sys), dim_(sys.dim()), N_(N), symbols_(std::move(symbols)) {
    const std::size_t need = symbols_for_tolerance(sys, tol);
    if (symbols_.size() < N + need) throw std::invalid_argument("orbit needs N + symbols_for_tolerance(tol) symbols");
    const int m = sys.alphabet();
    for (Symbol s : symbols_) {
        if (s >= m) throw std::invalid_argument("symbol outside the alphabet");
    }
    slack_ = symbols_.size() - N;
    const std::size_t L = symbols_.size();
    const Point base = sys.base_point();
    if (dim_ == 1) {
        coords_.resize(L + 1);
        coords_[L] = base[0];
        for (std::size_t k = L; k-- > 0;) coords_[k] = sys.map(symbols_[k]).mobius()(coords_[k + 1]);
    } else {
        coords_.resize(2 * (L + 1));
        std::complex<double> z = base.z();
        coords_[2 * L] = z.real();
        coords_[2 * L + 1] = z.imag();
        for (std::size_t k = L; k-- > 0;) {
            z = sys.map(symbols_[k]).similarity()(z);
            coords_[2 * k] = z.real();
            coords_[2 * k + 1] = z.imag();
        }
    }
}

Point SampledOrbit::point(std::size_t n) const {
    if (n > N_ + slack_) throw std::out_of_range("orbit index");
    if (dim_ == 1) return Point::d1(coords_[n]);
    return Point::d2(coords_[2 * n], coords_[2 * n + 1]);
}

double SampledOrbit::refined_distance(std::size_t a, std::size_t b) const {
    if (a > N_ || b > N_) throw std::out_of_range("orbit index");
    if (a == b) return 0.0;
    // Keep the inner points at least slack/2 symbols away from the truncation.
    const std::size_t limit = N_ + slack_ / 2 - std::max(a, b);
    std::size_t k = 0;
    while (k < limit && symbols_[a + k] == symbols_[b + k]) ++k;
    double factor = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        const ConformalMap& f = sys_->map(symbols_[a + i]);
        factor *= f.secant_ratio(point(a + i + 1), point(b + i + 1));
    }
    return factor * distance(point(a + k), point(b + k));
}

std::vector<Point> orbit_symbolic(SymbolStream stream, std::size_t N, const IfsSystem& sys, double tol) {
    if (stream.alphabet() != sys.alphabet()) throw std::invalid_argument("stream alphabet does not match the system");
    std::vector<Symbol> symbols(N + symbols_for_tolerance(sys, tol));
    stream.read_into(symbols);
    SampledOrbit orbit(sys, std::move(symbols), N, tol);
    std::vector<Point> out;
    out.reserve(N + 1);
    for (std::size_t n = 0; n <= N; ++n) out.push_back(orbit.point(n));
    return out;
}

namespace {

void check_antichain(const CylinderSet& f, int m) {
    for (const auto& w : f.words) w.validate(m);
    for (std::size_t i = 0; i < f.words.size(); ++i) {
        for (std::size_t j = 0; j < f.words.size(); ++j) {
            if (i != j && f.words[i].is_prefix_of(f.words[j])) {
                throw std::invalid_argument("cylinder set words overlap: " + f.words[i].to_string() + " and " +
                                            f.words[j].to_string());
            }
        }
    }
}

}  // namespace

Correlation correlation(const GibbsBackend& backend, const CylinderSet& f1, const CylinderSet& f2, long n) {
    if (n < 0) throw std::invalid_argument("correlation lag must be non-negative");
    check_antichain(f1, backend.alphabet());
    check_antichain(f2, backend.alphabet());
    Correlation out;
    double joint = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& I : f1.words) m1 += backend.cylinder_measure(I);
    for (const auto& J : f2.words) m2 += backend.cylinder_measure(J);
    for (const auto& I : f1.words) {
        for (const auto& J : f2.words) {
            JointMeasure jm = joint_cylinder_measure(backend, I, static_cast<std::size_t>(n), J);
            joint += jm.value;
            out.exact = out.exact && jm.exact;
        }
    }
    out.value = joint - m1 * m2;
    return out;
}

}  // namespace confmix
