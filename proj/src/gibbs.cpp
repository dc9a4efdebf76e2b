#include "confmix/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "confmix/simd/kernels.hpp"

namespace confmix {

using nlohmann::json;

namespace {

std::uint64_t ipow(std::uint64_t base, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

void check_table_size(int m, int k, double limit, const char* what) {
    if (std::pow(static_cast<double>(m), k) > limit) {
        throw std::invalid_argument(std::string(what) + ": m^k too large for exact enumeration");
    }
}

// log1p(z) / z without cancellation for small z.
double log1p_over(double z) {
    if (std::fabs(z) < 1e-5) return 1.0 - z * (0.5 - z / 3.0);
    return std::log1p(z) / z;
}

}  // namespace

PotentialSpec PotentialSpec::bernoulli(std::vector<double> p) {
    PotentialSpec s;
    s.kind = Kind::Bernoulli;
    s.p = std::move(p);
    return s;
}

PotentialSpec PotentialSpec::conformal_power(double tau, int depth) {
    PotentialSpec s;
    s.kind = Kind::ConformalPower;
    s.tau = tau;
    s.depth = depth;
    return s;
}

PotentialSpec PotentialSpec::closed_form(DensityKind kind) {
    PotentialSpec s;
    s.kind = Kind::ClosedFormDensity;
    s.density = kind;
    return s;
}

PotentialSpec PotentialSpec::from_json(const json& j) {
    const json& body = j.contains("potential") ? j.at("potential") : j;
    if (!body.is_object()) throw std::invalid_argument("potential spec must be an object");
    const std::string type = body.at("type").get<std::string>();
    if (type == "bernoulli") return bernoulli(body.at("p").get<std::vector<double>>());
    if (type == "conformal_power") return conformal_power(body.value("tau", 1.0), body.value("depth", 8));
    if (type == "density") {
        const std::string name = body.value("density", std::string("gauss_like"));
        if (name == "gauss_like") return closed_form(DensityKind::GaussLike);
        if (name == "uniform") return closed_form(DensityKind::Uniform);
        throw std::invalid_argument("unknown density: " + name);
    }
    throw std::invalid_argument("unknown potential type: " + type);
}

json PotentialSpec::to_json() const {
    switch (kind) {
        case Kind::Bernoulli:
            return json{{"type", "bernoulli"}, {"p", p}};
        case Kind::ConformalPower:
            return json{{"type", "conformal_power"}, {"tau", tau}, {"depth", depth}};
        case Kind::ClosedFormDensity:
            return json{{"type", "density"}, {"density", density == DensityKind::GaussLike ? "gauss_like" : "uniform"}};
    }
    return json();
}

GibbsBackend GibbsBackend::bernoulli(std::vector<double> p) {
    if (p.size() < 2 || p.size() > static_cast<std::size_t>(kMaxAlphabet)) {
        throw std::invalid_argument("Bernoulli weights need 2..64 entries");
    }
    double total = 0.0;
    for (double v : p) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("Bernoulli weights must be positive");
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("Bernoulli weights must sum to 1");
    GibbsBackend b;
    b.kind_ = Kind::Bernoulli;
    b.m_ = static_cast<int>(p.size());
    b.p_ = std::move(p);
    b.cum_p_.resize(b.p_.size());
    std::partial_sum(b.p_.begin(), b.p_.end(), b.cum_p_.begin());
    return b;
}

GibbsBackend GibbsBackend::density(const IfsSystem& sys, DensityKind kind) {
    if (sys.dim() != 1 || !sys.attractor_is_interval()) {
        throw std::invalid_argument("closed-form density backend needs a 1-D system whose attractor is an interval");
    }
    GibbsBackend b;
    b.kind_ = Kind::Density;
    b.m_ = sys.alphabet();
    b.density_ = kind;
    b.a_ = sys.attractor_box().lo[0];
    b.b_ = sys.attractor_box().hi[0];
    if (kind == DensityKind::GaussLike && (std::fabs(b.a_) > 1e-12 || std::fabs(b.b_ - 1.0) > 1e-12)) {
        throw std::invalid_argument("gauss_like density lives on [0, 1]");
    }
    for (int j = 0; j < b.m_; ++j) {
        b.maps_.push_back(sys.map(j).mobius());
        b.child_ends_.push_back({b.maps_.back()(b.a_), b.maps_.back()(b.b_)});
    }
    return b;
}

GibbsBackend GibbsBackend::spectral(std::shared_ptr<const SpectralData> data) {
    if (!data || data->levels.empty()) throw std::invalid_argument("empty spectral data");
    GibbsBackend b;
    b.kind_ = Kind::Spectral;
    b.m_ = data->m;
    b.spectral_ = std::move(data);
    return b;
}

std::string GibbsBackend::describe() const {
    switch (kind_) {
        case Kind::Bernoulli:
            return "bernoulli";
        case Kind::Density:
            return density_ == DensityKind::GaussLike ? "density:gauss_like" : "density:uniform";
        case Kind::Spectral:
            return "spectral:depth" + std::to_string(spectral_->depth);
    }
    return "";
}

double GibbsBackend::mean_density(double lo, double width) const {
    if (density_ == DensityKind::Uniform) return 1.0 / (b_ - a_);
    double z = width / (1.0 + lo);
    return log1p_over(z) / ((1.0 + lo) * std::numbers::ln2);
}

double GibbsBackend::interval_mass(double lo, double hi) const {
    if (kind_ != Kind::Density) throw std::logic_error("interval_mass needs the closed-form density backend");
    lo = std::max(lo, a_);
    hi = std::min(hi, b_);
    if (!(hi > lo)) return 0.0;
    return (hi - lo) * mean_density(lo, hi - lo);
}

double GibbsBackend::density_at(double x) const {
    if (kind_ != Kind::Density) throw std::logic_error("density_at needs the closed-form density backend");
    if (density_ == DensityKind::Uniform) return 1.0 / (b_ - a_);
    return 1.0 / (std::numbers::ln2 * (1.0 + x));
}

double GibbsBackend::cursor_mass_from_map(const Mobius& f) const {
    double u = std::min(f(a_), f(b_));
    double w = f.image_width(a_, b_);
    return w * mean_density(u, w);
}

MassCursor GibbsBackend::root() const { return MassCursor{}; }

MassCursor GibbsBackend::child(const MassCursor& parent, int j) const {
    MassCursor c;
    c.depth = parent.depth + 1;
    switch (kind_) {
        case Kind::Bernoulli:
            c.mass = parent.mass * p_[static_cast<std::size_t>(j)];
            break;
        case Kind::Density:
            c.mob = parent.mob.compose(maps_[static_cast<std::size_t>(j)]).normalized();
            c.mass = cursor_mass_from_map(c.mob);
            break;
        case Kind::Spectral: {
            const SpectralData& s = *spectral_;
            const std::uint64_t mm = static_cast<std::uint64_t>(m_);
            const std::uint64_t mem = s.levels[static_cast<std::size_t>(s.depth - 1)].size();
            if (c.depth <= s.depth) {
                c.code = parent.code * mm + static_cast<std::uint64_t>(j);
                c.mass = s.levels[static_cast<std::size_t>(c.depth)][c.code];
            } else {
                c.code = parent.code;
                double denom = s.levels[static_cast<std::size_t>(s.depth - 1)][parent.suffix];
                double num = s.levels[static_cast<std::size_t>(s.depth)][parent.suffix * mm + static_cast<std::uint64_t>(j)];
                c.mass = denom > 0.0 ? parent.mass * (num / denom) : 0.0;
            }
            c.suffix = (parent.suffix * mm + static_cast<std::uint64_t>(j)) % mem;
            break;
        }
    }
    if (kind_ != Kind::Spectral) {
        c.code = parent.code * static_cast<std::uint64_t>(m_) + static_cast<std::uint64_t>(j);
    }
    return c;
}

void GibbsBackend::conditionals(const MassCursor& c, double* out) const {
    switch (kind_) {
        case Kind::Bernoulli:
            std::copy(p_.begin(), p_.end(), out);
            return;
        case Kind::Density: {
            // Child weights with the common factor |det phi_I| removed, so they
            // stay representable for arbitrarily long words.
            const Mobius& f = c.mob;
            const double det = std::fabs(f.det());
            double total = 0.0;
            for (int j = 0; j < m_; ++j) {
                double e0 = child_ends_[static_cast<std::size_t>(j)][0];
                double e1 = child_ends_[static_cast<std::size_t>(j)][1];
                double q = std::fabs(e1 - e0) / std::fabs((f.r * e0 + f.s) * (f.r * e1 + f.s));
                double u = std::min(f(e0), f(e1));
                out[j] = q * mean_density(u, det * q);
                total += out[j];
            }
            for (int j = 0; j < m_; ++j) out[j] /= total;
            return;
        }
        case Kind::Spectral: {
            const SpectralData& s = *spectral_;
            const std::uint64_t mm = static_cast<std::uint64_t>(m_);
            const std::vector<double>* num;
            std::uint64_t base;
            double denom;
            if (c.depth < s.depth) {
                num = &s.levels[static_cast<std::size_t>(c.depth + 1)];
                base = c.code * mm;
                denom = s.levels[static_cast<std::size_t>(c.depth)][c.code];
            } else {
                num = &s.levels[static_cast<std::size_t>(s.depth)];
                base = c.suffix * mm;
                denom = s.levels[static_cast<std::size_t>(s.depth - 1)][c.suffix];
            }
            for (int j = 0; j < m_; ++j) {
                out[j] = denom > 0.0 ? (*num)[base + static_cast<std::uint64_t>(j)] / denom : 1.0 / m_;
            }
            return;
        }
    }
}

double GibbsBackend::cylinder_measure(const FiniteWord& w) const {
    w.validate(m_);
    if (kind_ == Kind::Bernoulli) {
        double mass = 1.0;
        for (Symbol s : w.symbols()) mass *= p_[s];
        return mass;
    }
    if (kind_ == Kind::Spectral && static_cast<int>(w.size()) <= spectral_->depth) {
        return spectral_->levels[w.size()][w.index(m_)];
    }
    MassCursor c = root();
    for (Symbol s : w.symbols()) c = child(c, s);
    return c.mass;
}

std::vector<double> GibbsBackend::conditional_next(const FiniteWord& w) const {
    w.validate(m_);
    MassCursor c = root();
    for (Symbol s : w.symbols()) c = child(c, s);
    if (c.mass == 0.0 && kind_ != Kind::Density) throw std::domain_error("conditional on a null cylinder");
    std::vector<double> out(static_cast<std::size_t>(m_));
    conditionals(c, out.data());
    return out;
}

int GibbsBackend::chain_memory() const {
    switch (kind_) {
        case Kind::Bernoulli:
            return 0;
        case Kind::Spectral:
            return spectral_->depth - 1;
        case Kind::Density:
            return std::max(1, static_cast<int>(std::floor(std::log(262144.0) / std::log(static_cast<double>(m_)))) - 1);
    }
    return 0;
}

std::vector<double> cylinder_table(const GibbsBackend& backend, int k) {
    const int m = backend.alphabet();
    if (k < 0) throw std::invalid_argument("negative depth");
    check_table_size(m, k, 1 << 28, "cylinder_table");
    if (backend.kind() == GibbsBackend::Kind::Spectral && k <= backend.spectral_data()->depth) {
        return backend.spectral_data()->levels[static_cast<std::size_t>(k)];
    }
    std::vector<double> out(ipow(static_cast<std::uint64_t>(m), k));
    std::vector<MassCursor> stack{backend.root()};
    std::vector<std::uint64_t> idx{0};
    while (!stack.empty()) {
        MassCursor c = stack.back();
        std::uint64_t i = idx.back();
        stack.pop_back();
        idx.pop_back();
        if (c.depth == k) {
            out[i] = c.mass;
            continue;
        }
        for (int j = 0; j < m; ++j) {
            stack.push_back(backend.child(c, j));
            idx.push_back(i * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(j));
        }
    }
    return out;
}

GibbsBackend eigen_solve(const IfsSystem& sys, const PotentialSpec& potential, int depth, double tol, int max_iter) {
    if (potential.kind == PotentialSpec::Kind::ClosedFormDensity) {
        throw std::invalid_argument("eigen_solve needs a Bernoulli or conformal_power potential");
    }
    const int m = sys.alphabet();
    if (depth < 1) throw std::invalid_argument("eigen_solve depth must be >= 1");
    check_table_size(m, depth, 1 << 26, "eigen_solve");
    if (potential.kind == PotentialSpec::Kind::Bernoulli && potential.p.size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("Bernoulli weights do not match the alphabet");
    }
    const std::size_t mm = static_cast<std::size_t>(m);
    const std::size_t N = ipow(mm, depth);
    const std::size_t M = N / mm;

    auto data = std::make_shared<SpectralData>();
    data->m = m;
    data->depth = depth;
    data->potential = potential;

    // Anchors phi_I(x0), built level by level: z_{jI'} = phi_j(z_{I'}).
    if (sys.dim() == 1) {
        std::vector<double> prev{sys.base_point()[0]};
        for (int d = 1; d <= depth; ++d) {
            std::vector<double> cur(prev.size() * mm);
            for (std::size_t j = 0; j < mm; ++j) {
                const Mobius& f = sys.map(static_cast<int>(j)).mobius();
                for (std::size_t i = 0; i < prev.size(); ++i) cur[j * prev.size() + i] = f(prev[i]);
            }
            prev = std::move(cur);
        }
        data->anchors = std::move(prev);
    }

    // W[j][I] = g_j(phi_j(z_I)).
    std::vector<std::vector<double>> W(mm, std::vector<double>(N));
    for (std::size_t j = 0; j < mm; ++j) {
        const ConformalMap& f = sys.map(static_cast<int>(j));
        for (std::size_t I = 0; I < N; ++I) {
            if (potential.kind == PotentialSpec::Kind::Bernoulli) {
                W[j][I] = potential.p[j];
            } else {
                Point z = sys.dim() == 1 ? Point::d1(data->anchors[I]) : sys.base_point();
                W[j][I] = std::pow(f.derivative_norm(z), potential.tau);
            }
        }
    }

    const simd::KernelTable& K = simd::active();
    auto apply_L = [&](const std::vector<double>& f, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t j = 0; j < mm; ++j) K.block_broadcast_mul_add(out.data(), W[j].data(), f.data() + j * M, N, mm);
    };
    auto apply_Lstar = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t j = 0; j < mm; ++j) K.block_dot(out.data() + j * M, W[j].data(), v.data(), M, mm);
    };

    std::vector<double> h(N, 1.0), tmp(N);
    double R = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        apply_L(h, tmp);
        R = K.max_abs(tmp.data(), N);
        if (!(R > 0.0)) throw std::runtime_error("transfer operator annihilated h");
        K.scale(tmp.data(), 1.0 / R, N);
        double diff = K.max_abs_diff(tmp.data(), h.data(), N);
        h.swap(tmp);
        if (diff <= tol) break;
    }
    if (it == max_iter) throw std::runtime_error("eigen_solve: h iteration did not converge");
    data->iterations_h = it + 1;
    data->R = R;
    apply_L(h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] -= R * h[i];
    data->residual = K.max_abs(tmp.data(), N) / K.max_abs(h.data(), N);

    std::vector<double> nu(N, 1.0 / static_cast<double>(N));
    double Rn = 0.0;
    it = 0;
    for (; it < max_iter; ++it) {
        apply_Lstar(nu, tmp);
        Rn = K.sum(tmp.data(), N);
        K.scale(tmp.data(), 1.0 / Rn, N);
        double diff = K.max_abs_diff(tmp.data(), nu.data(), N) / K.max_abs(tmp.data(), N);
        nu.swap(tmp);
        if (diff <= tol) break;
    }
    if (it == max_iter) throw std::runtime_error("eigen_solve: nu iteration did not converge");
    data->iterations_nu = it + 1;
    data->R_adjoint = Rn;

    double total = K.sum(nu.data(), N);
    K.scale(nu.data(), 1.0 / total, N);
    double hn = K.dot(h.data(), nu.data(), N);
    K.scale(h.data(), 1.0 / hn, N);

    data->levels.assign(static_cast<std::size_t>(depth) + 1, {});
    std::vector<double> mu(N);
    for (std::size_t i = 0; i < N; ++i) mu[i] = h[i] * nu[i];
    double mass = K.sum(mu.data(), N);
    K.scale(mu.data(), 1.0 / mass, N);
    data->levels[static_cast<std::size_t>(depth)] = std::move(mu);
    for (int d = depth; d > 0; --d) {
        const auto& fine = data->levels[static_cast<std::size_t>(d)];
        std::vector<double> coarse(fine.size() / mm);
        for (std::size_t i = 0; i < coarse.size(); ++i) {
            double acc = 0.0;
            for (std::size_t a = 0; a < mm; ++a) acc += fine[i * mm + a];
            coarse[i] = acc;
        }
        data->levels[static_cast<std::size_t>(d - 1)] = std::move(coarse);
    }
    data->h = std::move(h);
    data->nu = std::move(nu);
    return GibbsBackend::spectral(std::move(data));
}

GibbsBackend make_backend(const IfsSystem& sys, const PotentialSpec& potential) {
    switch (potential.kind) {
        case PotentialSpec::Kind::Bernoulli:
            if (potential.p.size() != static_cast<std::size_t>(sys.alphabet())) {
                throw std::invalid_argument("Bernoulli weights do not match the number of maps");
            }
            return GibbsBackend::bernoulli(potential.p);
        case PotentialSpec::Kind::ClosedFormDensity:
            return GibbsBackend::density(sys, potential.density);
        case PotentialSpec::Kind::ConformalPower:
            return eigen_solve(sys, potential, potential.depth);
    }
    throw std::invalid_argument("unknown potential");
}

GibbsCheck verify_gibbs_property(const GibbsBackend& backend, const IfsSystem& sys, int depth_max) {
    const int m = backend.alphabet();
    if (m != sys.alphabet()) throw std::invalid_argument("backend and system alphabets differ");
    check_table_size(m, depth_max, 1 << 22, "verify_gibbs_property");
    GibbsCheck out{INFINITY, 0.0};
    auto record = [&](double r) {
        out.min_ratio = std::min(out.min_ratio, r);
        out.max_ratio = std::max(out.max_ratio, r);
    };
    const double x0 = sys.dim() == 1 ? sys.base_point()[0] : 0.0;
    for (int n = 1; n <= depth_max; ++n) {
        const std::uint64_t count = ipow(static_cast<std::uint64_t>(m), n);
        std::vector<double> table = cylinder_table(backend, n);
        for (std::uint64_t idx = 0; idx < count; ++idx) {
            FiniteWord I = FiniteWord::from_index(idx, static_cast<std::size_t>(n), m);
            double g = 0.0;
            switch (backend.kind()) {
                case GibbsBackend::Kind::Bernoulli: {
                    g = 1.0;
                    for (Symbol s : I.symbols()) g *= backend.weights()[s];
                    break;
                }
                case GibbsBackend::Kind::Density: {
                    if (backend.density_kind() != DensityKind::GaussLike) {
                        throw std::invalid_argument("Gibbs check needs the gauss_like density");
                    }
                    CylinderMap f = sys.compose_word(I);
                    g = std::fabs(f.mob.derivative(x0)) * backend.density_at(f.mob(x0)) / backend.density_at(x0);
                    break;
                }
                case GibbsBackend::Kind::Spectral: {
                    const SpectralData& s = *backend.spectral_data();
                    // y_i = pi(sigma^i J) for J = I 1^inf, from the back.
                    double logg = 0.0;
                    Point y = sys.base_point();
                    for (int i = n - 1; i >= 0; --i) {
                        const ConformalMap& f = sys.map(I[static_cast<std::size_t>(i)]);
                        double gi = s.potential.kind == PotentialSpec::Kind::Bernoulli
                                        ? s.potential.p[I[static_cast<std::size_t>(i)]]
                                        : std::pow(f.derivative_norm(y), s.potential.tau);
                        logg += std::log(gi);
                        y = f.apply(y);
                    }
                    std::uint64_t head = 0;
                    for (int i = 0; i < s.depth; ++i) {
                        head = head * static_cast<std::uint64_t>(m) + (i < n ? I[static_cast<std::size_t>(i)] : 0);
                    }
                    g = std::exp(logg - n * std::log(s.R)) * s.h[head] / s.h[0];
                    break;
                }
            }
            record(table[idx] / g);
        }
    }
    return out;
}

GibbsCheck quasi_bernoulli_bound(const GibbsBackend& backend, int max_len) {
    const int m = backend.alphabet();
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
    check_table_size(m, 2 * max_len, 1 << 24, "quasi_bernoulli_bound");
    std::vector<std::vector<double>> t(static_cast<std::size_t>(2 * max_len) + 1);
    for (int k = 0; k <= 2 * max_len; ++k) t[static_cast<std::size_t>(k)] = cylinder_table(backend, k);
    GibbsCheck out{INFINITY, 0.0};
    for (int a = 1; a <= max_len; ++a) {
        for (int b = 1; b <= max_len; ++b) {
            const auto& ta = t[static_cast<std::size_t>(a)];
            const auto& tb = t[static_cast<std::size_t>(b)];
            const auto& tab = t[static_cast<std::size_t>(a + b)];
            for (std::size_t i = 0; i < ta.size(); ++i) {
                for (std::size_t j = 0; j < tb.size(); ++j) {
                    double r = tab[i * tb.size() + j] / (ta[i] * tb[j]);
                    out.min_ratio = std::min(out.min_ratio, r);
                    out.max_ratio = std::max(out.max_ratio, r);
                }
            }
        }
    }
    return out;
}

namespace {

std::mutex g_chain_mutex;

}  // namespace

// Finite-memory approximation used for long gaps: next-symbol law given the
// last L symbols, read from exact depth-(L+1) cylinder masses.
struct MemoryChain {
    int m = 0;
    int L = 0;
    std::vector<double> cond;  // cond[s * m + j]
};

const MemoryChain& GibbsBackend::memory_chain() const {
    std::lock_guard<std::mutex> lock(g_chain_mutex);
    if (!chain_) {
        auto c = std::make_shared<MemoryChain>();
        c->m = m_;
        c->L = chain_memory();
        std::vector<double> fine = cylinder_table(*this, c->L + 1);
        c->cond.resize(fine.size());
        const std::size_t mm = static_cast<std::size_t>(m_);
        for (std::size_t s = 0; s < fine.size() / mm; ++s) {
            double tot = 0.0;
            for (std::size_t j = 0; j < mm; ++j) tot += fine[s * mm + j];
            for (std::size_t j = 0; j < mm; ++j) c->cond[s * mm + j] = tot > 0.0 ? fine[s * mm + j] / tot : 0.0;
        }
        chain_ = std::move(c);
    }
    return *chain_;
}

JointMeasure joint_cylinder_measure(const GibbsBackend& backend, const FiniteWord& I, std::size_t lag,
                                    const FiniteWord& J) {
    const int m = backend.alphabet();
    I.validate(m);
    J.validate(m);
    if (lag < I.size()) {
        std::size_t overlap = std::min(I.size() - lag, J.size());
        for (std::size_t i = 0; i < overlap; ++i) {
            if (I[lag + i] != J[i]) return {0.0, true};
        }
        FiniteWord merged = I.concat(J.drop(overlap));
        return {backend.cylinder_measure(merged), true};
    }
    if (backend.kind() == GibbsBackend::Kind::Bernoulli) {
        return {backend.cylinder_measure(I) * backend.cylinder_measure(J), true};
    }
    const std::size_t gap = lag - I.size();
    MassCursor start = backend.root();
    for (Symbol s : I.symbols()) start = backend.child(start, s);
    if (std::pow(static_cast<double>(m), static_cast<double>(gap)) <= 65536.0) {
        double total = 0.0;
        std::vector<MassCursor> stack{start};
        while (!stack.empty()) {
            MassCursor c = stack.back();
            stack.pop_back();
            if (c.depth == static_cast<int>(I.size() + gap)) {
                for (Symbol s : J.symbols()) c = backend.child(c, s);
                total += c.mass;
                continue;
            }
            for (int j = 0; j < m; ++j) stack.push_back(backend.child(c, j));
        }
        return {total, true};
    }
    // Long gap: propagate the law of the last L symbols.
    const MemoryChain& chain = backend.memory_chain();
    const std::size_t mm = static_cast<std::size_t>(m);
    const std::size_t states = chain.cond.size() / mm;
    std::vector<double> v(states, 0.0), nv(states);
    // Exact start: extend I by enough symbols to fill the memory.
    std::size_t fill = I.size() < static_cast<std::size_t>(chain.L) ? static_cast<std::size_t>(chain.L) - I.size() : 0;
    {
        std::vector<std::pair<MassCursor, FiniteWord>> stack{{start, I}};
        while (!stack.empty()) {
            auto [c, w] = stack.back();
            stack.pop_back();
            if (w.size() == I.size() + fill) {
                v[w.drop(w.size() - static_cast<std::size_t>(chain.L)).index(m)] += c.mass;
                continue;
            }
            for (int j = 0; j < m; ++j) {
                FiniteWord cw = w;
                cw.push_back(static_cast<Symbol>(j));
                stack.push_back({backend.child(c, j), std::move(cw)});
            }
        }
    }
    for (std::size_t step = fill; step < gap; ++step) {
        std::fill(nv.begin(), nv.end(), 0.0);
        for (std::size_t s = 0; s < states; ++s) {
            if (v[s] == 0.0) continue;
            for (std::size_t j = 0; j < mm; ++j) nv[(s * mm + j) % states] += v[s] * chain.cond[s * mm + j];
        }
        v.swap(nv);
    }
    // Symbols already drawn past the gap (fill > gap) must match J's prefix.
    double total = 0.0;
    std::size_t pre = fill > gap ? fill - gap : 0;
    for (std::size_t s = 0; s < states; ++s) {
        if (v[s] == 0.0) continue;
        FiniteWord tail = FiniteWord::from_index(s, static_cast<std::size_t>(chain.L), m);
        bool ok = true;
        for (std::size_t i = 0; i < pre && i < J.size(); ++i) {
            ok = ok && tail[static_cast<std::size_t>(chain.L) - pre + i] == J[i];
        }
        if (!ok) continue;
        double p = v[s];
        std::size_t state = s;
        for (std::size_t i = pre; i < J.size(); ++i) {
            p *= chain.cond[state * mm + J[i]];
            state = (state * mm + J[i]) % states;
        }
        total += p;
    }
    return {total, false};
}

double mixing_coeff_cylinders(const GibbsBackend& backend, int k, int n) {
    const int m = backend.alphabet();
    if (k < 1 || n < 0) throw std::invalid_argument("mixing coefficient needs depth >= 1 and lag >= 0");
    const std::size_t mm = static_cast<std::size_t>(m);
    // Disjoint blocks of a product measure: mu(I ∩ sigma^-n J) = mu(I) mu(J)
    // identically, so every term vanishes.
    if (backend.kind() == GibbsBackend::Kind::Bernoulli && n >= k) return 0.0;
    std::vector<double> tk = cylinder_table(backend, k);
    if (n < k) {
        check_table_size(m, k + n, 1u << 30, "mixing_coeff_cylinders");
        double worst = 0.0;
        const std::size_t shift = ipow(mm, n);
        const std::size_t keep = ipow(mm, k - n);
        // Pairs whose overlap disagrees have empty intersection: |0 - mu(I)|.
        bool has_mismatch = ipow(mm, k) > 1;
        std::vector<std::pair<MassCursor, std::uint64_t>> stack;
        std::vector<double> cond(mm);
        for (std::size_t I = 0; I < tk.size(); ++I) {
            if (has_mismatch) worst = std::max(worst, tk[I]);
            MassCursor cI = backend.root();
            FiniteWord wI = FiniteWord::from_index(I, static_cast<std::size_t>(k), m);
            for (Symbol s : wI.symbols()) cI = backend.child(cI, s);
            const std::size_t jhead = (I % keep) * shift;
            if (n == 0) {
                worst = std::max(worst, std::fabs(1.0 - tk[I]));
                continue;
            }
            stack.assign(1, {cI, 0});
            while (!stack.empty()) {
                auto [c, w] = stack.back();
                stack.pop_back();
                if (c.depth == k + n - 1) {
                    // Leaves from one conditional law instead of m child cursors.
                    backend.conditionals(c, cond.data());
                    for (std::size_t j = 0; j < mm; ++j) {
                        double muJ = tk[jhead + w * mm + j];
                        if (muJ > 0.0) worst = std::max(worst, std::fabs(c.mass * cond[j] / muJ - tk[I]));
                    }
                    continue;
                }
                for (int j = 0; j < m; ++j) stack.push_back({backend.child(c, j), w * mm + static_cast<std::size_t>(j)});
            }
        }
        return worst;
    }
    // Gap words: accumulate mu(I G J) over G for every (I, J).
    check_table_size(m, k + n, 1u << 30, "mixing_coeff_cylinders");
    check_table_size(m, 2 * k, 1u << 26, "mixing_coeff_cylinders");
    const std::size_t nk = tk.size();
    std::vector<double> acc(nk * nk, 0.0);
    std::vector<std::pair<MassCursor, std::uint64_t>> stack{{backend.root(), 0}};
    const std::size_t tail = ipow(mm, k);
    const std::size_t head_div = ipow(mm, n);
    while (!stack.empty()) {
        auto [c, w] = stack.back();
        stack.pop_back();
        if (c.depth == k + n) {
            acc[(w / head_div) * nk + (w % tail)] += c.mass;
            continue;
        }
        for (int j = 0; j < m; ++j) stack.push_back({backend.child(c, j), w * mm + static_cast<std::size_t>(j)});
    }
    double worst = 0.0;
    for (std::size_t I = 0; I < nk; ++I) {
        for (std::size_t J = 0; J < nk; ++J) {
            if (tk[J] > 0.0) worst = std::max(worst, std::fabs(acc[I * nk + J] / tk[J] - tk[I]));
        }
    }
    return worst;
}

}  // namespace confmix
