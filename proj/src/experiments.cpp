#include "confmix/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "confmix/simd/kernels.hpp"

namespace confmix {

namespace {

// Hits closer to the radius than this (relative) are flagged after refinement.
constexpr double kFlagBand = 1e-9;
// Relative band around the radius in which the vectorized pass defers to the
// refined distance.
constexpr double kNearSlack = 1e-7;
// mu-samples behind the recurrence integral when balls have no closed form.
constexpr std::size_t kIntegralSamples = 4096;

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

SampledOrbit sample_orbit(const IfsSystem& sys, const GibbsBackend& mu, std::uint64_t seed, std::uint64_t id,
                          std::size_t N, double tol) {
    const std::size_t extra = symbols_for_tolerance(sys, tol);
    MuSampler sampler(mu, seed, id);
    return SampledOrbit(sys, sampler.draw(N + extra), N, tol);
}

// mu-distributed point from stream `id`.
Point sample_point(const IfsSystem& sys, const GibbsBackend& mu, std::uint64_t seed, std::uint64_t id, double tol) {
    return sample_orbit(sys, mu, seed, id, 0, tol).point(0);
}

double abs_slack(const IfsSystem& sys) { return 1e-13 * std::max(1.0, sys.diameter_hi()); }

// Vectorized first pass over n = 1..N against a fixed center.
void classify_steps(const SampledOrbit& orbit, const Point& c, const std::vector<double>& radii, double slack_abs,
                    std::vector<std::uint8_t>& flags) {
    const auto& K = simd::active();
    const std::size_t N = orbit.steps();
    flags.resize(N);
    if (N == 0) return;
    if (orbit.dim() == 1) {
        K.classify_hits_1d(orbit.coords() + 1, c[0], radii.data(), kNearSlack, slack_abs, N, flags.data());
    } else {
        K.classify_hits_2d(orbit.coords() + 2, c[0], c[1], radii.data(), kNearSlack, slack_abs, N, flags.data());
    }
}

std::vector<std::size_t> resolve_checkpoints(const RunOptions& opt, std::size_t N) {
    std::vector<std::size_t> cps = opt.checkpoints.empty() ? default_checkpoints(N) : opt.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    for (std::size_t c : cps) {
        if (c == 0 || c > N) throw std::invalid_argument("checkpoints must lie in 1..N");
    }
    return cps;
}

std::vector<double> radius_table(const RadiusFunction& psi, std::size_t N) {
    std::vector<double> r(N);
    for (std::size_t n = 1; n <= N; ++n) r[n - 1] = psi(n);
    return r;
}

// Prefix sums of per-step terms read off at the checkpoints.
std::vector<double> sums_at(const std::vector<double>& terms, const std::vector<std::size_t>& cps) {
    std::vector<double> out;
    out.reserve(cps.size());
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t c : cps) {
        for (; n < c; ++n) acc += terms[n];
        out.push_back(acc);
    }
    return out;
}

// Terms f(r_n) for a sample-independent function of the radius, memoized by
// radius. With more than `max_direct` distinct radii, f is evaluated on a
// log-spaced grid and interpolated in log-log coordinates.
template <class F>
std::vector<double> radius_terms(const std::vector<double>& radii, F&& f, std::size_t max_direct) {
    std::vector<double> distinct(radii);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::map<double, double> memo;
    if (distinct.size() <= max_direct) {
        for (double r : distinct) memo[r] = f(r);
        std::vector<double> out(radii.size());
        for (std::size_t i = 0; i < radii.size(); ++i) out[i] = memo[radii[i]];
        return out;
    }
    const double lo = std::log(distinct.front()), hi = std::log(distinct.back());
    const std::size_t G = 257;
    std::vector<double> lr(G), lv(G);
    for (std::size_t g = 0; g < G; ++g) {
        lr[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(G - 1);
        lv[g] = std::log(std::max(f(std::exp(lr[g])), 1e-300));
    }
    std::vector<double> out(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        double x = std::log(radii[i]);
        double t = (x - lo) / (hi - lo) * static_cast<double>(G - 1);
        std::size_t g = std::min<std::size_t>(G - 2, static_cast<std::size_t>(std::max(0.0, std::floor(t))));
        double u = t - static_cast<double>(g);
        out[i] = std::exp(lv[g] + u * (lv[g + 1] - lv[g]));
    }
    return out;
}

struct StepCounter {
    std::vector<std::size_t> cps;
    std::vector<std::uint64_t> counts;
    std::uint64_t running = 0;
    std::size_t next = 0;

    explicit StepCounter(std::vector<std::size_t> c) : cps(std::move(c)) {}
    // Feeds steps 1..N in order.
    void step(std::size_t n, bool hit) {
        running += hit;
        while (next < cps.size() && cps[next] == n) {
            counts.push_back(running);
            ++next;
        }
    }
};

CountingRecord make_record(std::uint64_t id, const Point& x0, const StepCounter& sc, const std::vector<double>& psi_sums,
                           const std::vector<double>* ball_sums) {
    CountingRecord rec;
    rec.sample_id = id;
    rec.x0 = x0;
    for (std::size_t i = 0; i < sc.cps.size(); ++i) {
        Checkpoint c;
        c.N = sc.cps[i];
        c.count = sc.counts[i];
        c.psi_sum = psi_sums[i];
        if (ball_sums) c.ball_sum = (*ball_sums)[i];
        rec.checkpoints.push_back(c);
    }
    return rec;
}

void check_run_inputs(const IfsSystem& sys, const GibbsBackend& mu, std::size_t N) {
    if (sys.alphabet() != mu.alphabet()) throw std::invalid_argument("measure and system alphabets differ");
    if (N == 0) throw std::invalid_argument("N must be positive");
}

// Gauss-Legendre nodes and weights on [-1, 1].
const std::vector<std::pair<double, double>>& gauss_legendre() {
    static const std::vector<std::pair<double, double>> rule = [] {
        const int n = 32;
        std::vector<std::pair<double, double>> out;
        for (int i = 1; i <= n; ++i) {
            double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
            double dp = 1.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-16) break;
            }
            out.emplace_back(x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        return out;
    }();
    return rule;
}

}  // namespace

std::vector<std::size_t> default_checkpoints(std::size_t N) {
    std::vector<std::size_t> out;
    for (std::size_t base = 1000; base < N; base *= 10) {
        out.push_back(base);
        if (3 * base < N) out.push_back(3 * base);
    }
    out.push_back(N);
    return out;
}

std::vector<CountingRecord> shrinking_target_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                 const TargetSequence& targets, const RadiusFunction& psi,
                                                 std::size_t N, std::size_t samples, const RunOptions& opt) {
    check_run_inputs(sys, mu, N);
    if (targets.points.empty()) throw std::invalid_argument("shrinking target run needs at least one target");
    for (const auto& y : targets.points) {
        if (y.dim != sys.dim()) throw std::invalid_argument("target dimension does not match the system");
    }
    const auto cps = resolve_checkpoints(opt, N);
    const auto radii = radius_table(psi, N);
    const std::size_t period = targets.points.size();

    // mu(B(y_n, psi(n))) is sample independent.
    std::vector<double> terms(N);
    {
        std::map<std::pair<std::size_t, double>, double> memo;
        for (std::size_t n = 1; n <= N; ++n) {
            auto key = std::make_pair((n - 1) % period, radii[n - 1]);
            auto it = memo.find(key);
            if (it == memo.end()) {
                it = memo.emplace(key, ball_measure(sys, mu, targets.at(n), radii[n - 1], opt.bracket).mid()).first;
            }
            terms[n - 1] = it->second;
        }
    }
    const auto psi_sums = sums_at(terms, cps);
    const double slack_abs = abs_slack(sys);

    std::vector<CountingRecord> out(samples);
    parallel_for(samples, opt.threads, [&](std::size_t id) {
        SampledOrbit orbit = sample_orbit(sys, mu, opt.seed, id, N, opt.orbit_tol);
        StepCounter sc(cps);
        std::uint64_t flagged = 0;
        auto decide = [&](std::size_t n, double d) {
            const double r = radii[n - 1];
            if (std::fabs(d - r) <= kFlagBand * r) ++flagged;
            return d < r;
        };
        if (period == 1) {
            std::vector<std::uint8_t> flags;
            classify_steps(orbit, targets.points[0], radii, slack_abs, flags);
            for (std::size_t n = 1; n <= N; ++n) {
                std::uint8_t f = flags[n - 1];
                bool hit = f == simd::kHit || (f == simd::kNear && decide(n, distance(orbit.point(n), targets.at(n))));
                sc.step(n, hit);
            }
        } else {
            for (std::size_t n = 1; n <= N; ++n) sc.step(n, decide(n, distance(orbit.point(n), targets.at(n))));
        }
        CountingRecord rec = make_record(id, orbit.point(0), sc, psi_sums, nullptr);
        rec.flagged = flagged;
        out[id] = std::move(rec);
    });
    return out;
}

std::vector<CountingRecord> recurrence_pure_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                const RadiusFunction& psi, std::size_t N, std::size_t samples,
                                                const RunOptions& opt) {
    check_run_inputs(sys, mu, N);
    const auto cps = resolve_checkpoints(opt, N);
    const auto radii = radius_table(psi, N);
    const bool exact = has_exact_balls(sys, mu);
    const auto integral_terms =
        radius_terms(radii,
                     [&](double r) {
                         return recurrence_integral(sys, mu, r, kIntegralSamples, mix64(opt.seed ^ 0x696e74656772616cULL),
                                                    opt.bracket);
                     },
                     exact ? SIZE_MAX : 512);
    const auto psi_sums = sums_at(integral_terms, cps);
    const double slack_abs = abs_slack(sys);

    std::vector<CountingRecord> out(samples);
    parallel_for(samples, opt.threads, [&](std::size_t id) {
        SampledOrbit orbit = sample_orbit(sys, mu, opt.seed, id, N, opt.orbit_tol);
        const Point x0 = orbit.point(0);
        std::vector<std::uint8_t> flags;
        classify_steps(orbit, x0, radii, slack_abs, flags);
        StepCounter sc(cps);
        std::uint64_t flagged = 0;
        for (std::size_t n = 1; n <= N; ++n) {
            std::uint8_t f = flags[n - 1];
            bool hit = f == simd::kHit;
            if (f == simd::kNear) {
                const double r = radii[n - 1];
                const double d = orbit.refined_distance(0, n);
                if (std::fabs(d - r) <= kFlagBand * r) ++flagged;
                hit = d < r;
            }
            sc.step(n, hit);
        }
        // Sample-dependent ball masses, memoized by radius.
        std::vector<double> ball_terms(N);
        std::map<double, double> memo;
        for (std::size_t n = 1; n <= N; ++n) {
            const double r = radii[n - 1];
            if (n > 1 && r == radii[n - 2]) {
                ball_terms[n - 1] = ball_terms[n - 2];
                continue;
            }
            auto it = memo.find(r);
            if (it == memo.end()) it = memo.emplace(r, ball_measure(sys, mu, x0, r, opt.bracket).mid()).first;
            ball_terms[n - 1] = it->second;
        }
        const auto ball_sums = sums_at(ball_terms, cps);
        CountingRecord rec = make_record(id, x0, sc, psi_sums, &ball_sums);
        rec.flagged = flagged;
        out[id] = std::move(rec);
    });
    return out;
}

std::vector<CountingRecord> recurrence_modified_run(const IfsSystem& sys, const GibbsBackend& mu,
                                                    const RadiusFunction& psi, std::size_t N, std::size_t samples,
                                                    const RunOptions& opt) {
    check_run_inputs(sys, mu, N);
    const auto cps = resolve_checkpoints(opt, N);
    const auto levels = radius_table(psi, N);
    const auto psi_sums = sums_at(levels, cps);
    const double slack_abs = abs_slack(sys);
    const double diam = sys.diameter_hi();

    std::vector<CountingRecord> out(samples);
    parallel_for(samples, opt.threads, [&](std::size_t id) {
        SampledOrbit orbit = sample_orbit(sys, mu, opt.seed, id, N, opt.orbit_tol);
        const Point x0 = orbit.point(0);
        // t_n is non-increasing in n, so the certified upper end of t at the
        // start of a block bounds t_n on the whole block.
        std::vector<double> t_hi(N);
        for (std::size_t b = 1; b <= N;) {
            const std::size_t e = std::min(N + 1, b + std::max<std::size_t>(1, b / 16));
            TnResult t = t_n_search(sys, mu, x0, levels[b - 1], 1e-7 * diam, opt.bracket, 80);
            std::fill(t_hi.begin() + static_cast<std::ptrdiff_t>(b - 1), t_hi.begin() + static_cast<std::ptrdiff_t>(e - 1),
                      t.radius);
            b = e;
        }
        std::vector<std::uint8_t> flags;
        classify_steps(orbit, x0, t_hi, slack_abs, flags);
        StepCounter sc(cps);
        std::uint64_t uncertain = 0;
        for (std::size_t n = 1; n <= N; ++n) {
            bool hit = false;
            if (flags[n - 1] != simd::kMiss) {
                const double level = levels[n - 1];
                if (level > 1.0) {
                    hit = true;
                } else {
                    // |T^n x - x| < t_n(x) iff mu(B(x, |T^n x - x|)) < psi(n) for atomless mu.
                    const double d = orbit.refined_distance(0, n);
                    MeasureBracket m = ball_measure(sys, mu, x0, d, opt.bracket);
                    if (m.upper < level) {
                        hit = true;
                    } else if (m.lower < level) {
                        ++uncertain;
                        hit = m.mid() < level;
                    }
                }
            }
            sc.step(n, hit);
        }
        CountingRecord rec = make_record(id, x0, sc, psi_sums, nullptr);
        rec.uncertain = uncertain;
        out[id] = std::move(rec);
    });
    return out;
}

double checkpoint_normalizer(const Checkpoint& c) { return c.ball_sum ? *c.ball_sum : c.psi_sum; }

double bc_residual_value(double count, double expected, double scale_sum, double epsilon) {
    if (!(scale_sum > 1.0)) return std::nan("");
    double scale = std::sqrt(scale_sum) * std::pow(std::log(scale_sum + 1.0), 1.5 + epsilon);
    return (count - expected) / scale;
}

std::vector<double> bc_residual(const CountingRecord& record, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    std::vector<double> out;
    for (const auto& c : record.checkpoints) {
        double psi = checkpoint_normalizer(c);
        out.push_back(bc_residual_value(static_cast<double>(c.count), psi, psi, epsilon));
    }
    return out;
}

double recurrence_integral(const IfsSystem& sys, const GibbsBackend& mu, double r, std::size_t samples,
                           std::uint64_t seed, const BracketOptions& opt) {
    if (!(r >= 0.0)) throw std::invalid_argument("radius must be non-negative");
    if (r == 0.0) return 0.0;
    if (has_exact_balls(sys, mu)) {
        const double a = sys.attractor_box().lo[0], b = sys.attractor_box().hi[0];
        // The integrand has kinks where x - r or x + r crosses an end of the hull.
        std::vector<double> cuts{a, b};
        if (a + r < b) cuts.push_back(a + r);
        if (b - r > a) cuts.push_back(b - r);
        std::sort(cuts.begin(), cuts.end());
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = cuts[i], hi = cuts[i + 1];
            if (!(hi > lo)) continue;
            const int pieces = 4;
            for (int p = 0; p < pieces; ++p) {
                const double u = lo + (hi - lo) * p / pieces, v = lo + (hi - lo) * (p + 1) / pieces;
                const double c = 0.5 * (u + v), h = 0.5 * (v - u);
                for (const auto& [x, w] : gauss_legendre()) {
                    const double t = c + h * x;
                    total += h * w * mu.density_at(t) * mu.interval_mass(t - r, t + r);
                }
            }
        }
        return total;
    }
    return recurrence_integral_mc(sys, mu, r, samples, seed, opt).value;
}

Estimate recurrence_integral_mc(const IfsSystem& sys, const GibbsBackend& mu, double r, std::size_t samples,
                                std::uint64_t seed, const BracketOptions& opt) {
    if (samples < 2) throw std::invalid_argument("Monte Carlo needs at least 2 samples");
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        Point x = sample_point(sys, mu, seed, i, 1e-15);
        double v = ball_measure(sys, mu, x, r, opt).mid();
        s1 += v;
        s2 += v * v;
    }
    Estimate e;
    e.samples = samples;
    e.value = s1 / static_cast<double>(samples);
    double var = std::max(0.0, s2 / static_cast<double>(samples) - e.value * e.value);
    e.stderr_ = std::sqrt(var / static_cast<double>(samples - 1));
    return e;
}

MeasureBracket ball_sum_range(const IfsSystem& sys, const GibbsBackend& mu, const Point& x, const RadiusFunction& psi,
                              std::uint64_t n_from, std::uint64_t n_to, const BracketOptions& opt) {
    MeasureBracket total;
    std::size_t runs = 0;
    for (std::uint64_t n = n_from + 1; n <= n_to;) {
        if (++runs > 10'000'000) throw std::invalid_argument("ball_sum_range: too many distinct radii");
        const double r = psi(n);
        // Last index of the run: gallop, then bisect.
        std::uint64_t lo = n, step = 1;
        while (lo + step <= n_to && psi(lo + step) == r) {
            lo += step;
            step *= 2;
        }
        std::uint64_t hi = std::min(n_to + 1, lo + step);
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            (psi(mid) == r ? lo : hi) = mid;
        }
        const double len = static_cast<double>(lo - n + 1);
        MeasureBracket b = ball_measure(sys, mu, x, r, opt);
        total.lower += len * b.lower;
        total.upper += len * b.upper;
        n = lo + 1;
    }
    return total;
}

namespace {

Estimate bernoulli_estimate(std::uint64_t hits, std::size_t samples) {
    Estimate e;
    e.samples = samples;
    e.value = static_cast<double>(hits) / static_cast<double>(samples);
    e.stderr_ = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(samples));
    return e;
}

}  // namespace

Estimate recurrence_set_mc(const IfsSystem& sys, const GibbsBackend& mu, std::size_t n, double r,
                           std::size_t samples, std::uint64_t seed, unsigned threads) {
    if (n == 0 || samples == 0) throw std::invalid_argument("recurrence_set_mc needs n >= 1 and samples >= 1");
    std::vector<std::uint8_t> hit(samples);
    parallel_for(samples, threads, [&](std::size_t i) {
        SampledOrbit orbit = sample_orbit(sys, mu, seed, i, n, 1e-15);
        hit[i] = orbit.refined_distance(0, n) < r;
    });
    return bernoulli_estimate(std::accumulate(hit.begin(), hit.end(), std::uint64_t{0}), samples);
}

Estimate modified_recurrence_set_mc(const IfsSystem& sys, const GibbsBackend& mu, std::size_t n, double psi,
                                    std::size_t samples, std::uint64_t seed, unsigned threads,
                                    const BracketOptions& opt) {
    if (n == 0 || samples == 0) throw std::invalid_argument("modified_recurrence_set_mc needs n >= 1 and samples >= 1");
    std::vector<std::uint8_t> hit(samples);
    parallel_for(samples, threads, [&](std::size_t i) {
        SampledOrbit orbit = sample_orbit(sys, mu, seed, i, n, 1e-15);
        const double d = orbit.refined_distance(0, n);
        hit[i] = psi > 1.0 || ball_measure(sys, mu, orbit.point(0), d, opt).mid() < psi;
    });
    return bernoulli_estimate(std::accumulate(hit.begin(), hit.end(), std::uint64_t{0}), samples);
}

PairwiseRecord pairwise_independence_check(const GibbsBackend& mu,
                                           const std::function<CylinderSet(std::size_t)>& events, std::size_t a,
                                           std::size_t b) {
    if (a < 1 || b < a) throw std::invalid_argument("pairwise check needs 1 <= a <= b");
    std::vector<CylinderSet> E;
    std::vector<double> mass;
    for (std::size_t n = a; n <= b; ++n) {
        E.push_back(events(n));
        double s = 0.0;
        for (const auto& w : E.back().words) s += mu.cylinder_measure(w);
        mass.push_back(s);
    }
    PairwiseRecord rec;
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    rec.rhs_main = total * total;
    rec.rhs_error = total;
    double off = 0.0;
    for (std::size_t i = 0; i < E.size(); ++i) {
        for (std::size_t j = i + 1; j < E.size(); ++j) {
            // mu(sigma^-m E_m ∩ sigma^-n E_n) = mu(E_m ∩ sigma^-(n-m) E_n) by invariance.
            for (const auto& I : E[i].words) {
                for (const auto& J : E[j].words) {
                    JointMeasure jm = joint_cylinder_measure(mu, I, j - i, J);
                    off += jm.value;
                    rec.exact = rec.exact && jm.exact;
                }
            }
        }
    }
    rec.lhs = total + 2.0 * off;
    return rec;
}

PairwiseRecord pairwise_independence_balls(const IfsSystem& sys, const GibbsBackend& mu, const Point& y,
                                           const RadiusFunction& psi, std::size_t a, std::size_t b,
                                           std::size_t samples, std::uint64_t seed, const BracketOptions& opt) {
    if (a < 1 || b < a) throw std::invalid_argument("pairwise check needs 1 <= a <= b");
    if (samples < 2) throw std::invalid_argument("Monte Carlo needs at least 2 samples");
    PairwiseRecord rec;
    rec.exact = false;
    rec.samples = samples;
    double total = 0.0;
    for (std::size_t n = a; n <= b; ++n) total += ball_measure(sys, mu, y, psi(n), opt).mid();
    rec.rhs_main = total * total;
    rec.rhs_error = total;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        SampledOrbit orbit = sample_orbit(sys, mu, seed, i, b, 1e-15);
        double S = 0.0;
        for (std::size_t n = a; n <= b; ++n) S += distance(orbit.point(n), y) < psi(n);
        s1 += S * S;
        s2 += S * S * S * S;
    }
    rec.lhs = s1 / static_cast<double>(samples);
    double var = std::max(0.0, s2 / static_cast<double>(samples) - rec.lhs * rec.lhs);
    rec.lhs_stderr = std::sqrt(var / static_cast<double>(samples - 1));
    return rec;
}

double RateFit::gamma() const { return std::exp(slope); }

namespace {

RateFit least_squares_log(const std::vector<std::pair<double, double>>& series) {
    const double n = static_cast<double>(series.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    RateFit f;
    f.n_min = INFINITY;
    f.n_max = -INFINITY;
    for (const auto& [x, v] : series) {
        if (!(v > 0.0)) throw std::invalid_argument("exponential fit needs positive values");
        double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        f.n_min = std::min(f.n_min, x);
        f.n_max = std::max(f.n_max, x);
    }
    const double dxx = sxx - sx * sx / n;
    if (!(dxx > 0.0)) throw std::invalid_argument("exponential fit needs distinct n values");
    f.slope = (sxy - sx * sy / n) / dxx;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_tot = 0.0, ss_res = 0.0;
    const double ybar = sy / n;
    for (const auto& [x, v] : series) {
        double y = std::log(v);
        double e = y - (f.intercept + f.slope * x);
        ss_res += e * e;
        ss_tot += (y - ybar) * (y - ybar);
    }
    // A constant series is fitted exactly by a flat line.
    f.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return f;
}

}  // namespace

RateFit fit_exponential_rate(const std::vector<std::pair<double, double>>& series) {
    if (series.size() < 4) throw std::invalid_argument("exponential fit needs at least 4 points");
    return least_squares_log(series);
}

MixingEnvelope mixing_envelope(const std::vector<std::pair<double, double>>& series) {
    std::vector<std::pair<double, double>> pos;
    for (const auto& p : series) {
        if (p.second > 0.0) pos.push_back(p);
    }
    MixingEnvelope env;
    if (pos.empty()) return env;
    if (pos.size() == 1) {
        // One point fixes no rate; take gamma = 1/2 through it.
        env.gamma = 0.5;
    } else {
        env.fit = least_squares_log(pos);
        env.gamma = env.fit.gamma();
    }
    env.fitted = true;
    env.C = 1.0;
    for (const auto& [n, v] : pos) env.C = std::max(env.C, v / std::pow(env.gamma, n));
    return env;
}

std::vector<std::pair<double, double>> conditional_pairs(const GibbsBackend& mu, int k, int n) {
    const int m = mu.alphabet();
    if (k < 1 || n < 0) throw std::invalid_argument("conditional_pairs needs k >= 1 and n >= 0");
    if (std::pow(static_cast<double>(m), 2.0 * k) > 1 << 24) throw std::invalid_argument("conditional_pairs: m^2k too large");
    const std::vector<double> tk = cylinder_table(mu, k);
    const std::size_t nk = tk.size();
    std::vector<std::pair<double, double>> out;
    out.reserve(nk * nk);
    if (mu.kind() == GibbsBackend::Kind::Bernoulli && n >= k) {
        // Exact independence of disjoint blocks.
        for (std::size_t I = 0; I < nk; ++I) {
            for (std::size_t J = 0; J < nk; ++J) out.emplace_back(tk[I], tk[I]);
        }
        return out;
    }
    if (std::pow(static_cast<double>(m), static_cast<double>(k + n)) > 1 << 26) {
        throw std::invalid_argument("conditional_pairs: m^(k+n) too large");
    }
    const std::vector<double> t = cylinder_table(mu, k + n);
    const std::size_t mm = static_cast<std::size_t>(m);
    std::vector<double> joint(nk * nk, 0.0);
    std::size_t mn = 1;
    for (int i = 0; i < n; ++i) mn *= mm;
    // Word w of length k + n: I = first k symbols, J = last k symbols.
    for (std::size_t w = 0; w < t.size(); ++w) joint[(w / mn) * nk + (w % nk)] += t[w];
    // For n < k the first k and last k symbols overlap, so each w feeds the
    // single compatible (I, J) pair and the others stay 0.
    for (std::size_t I = 0; I < nk; ++I) {
        for (std::size_t J = 0; J < nk; ++J) {
            double a = tk[J] > 0.0 ? joint[I * nk + J] / tk[J] : 0.0;
            out.emplace_back(a, tk[I]);
        }
    }
    return out;
}

namespace {

using P2 = std::pair<double, double>;

double cross(const P2& o, const P2& a, const P2& b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
}

std::vector<P2> convex_hull(std::vector<P2> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;
    std::vector<P2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

ProductSystem::ProductSystem(const IfsSystem& a, const GibbsBackend& mu_a, const IfsSystem& b,
                             const GibbsBackend& mu_b)
    : a_(&a), mu_a_(&mu_a), b_(&b), mu_b_(&mu_b) {
    if (a.alphabet() != mu_a.alphabet() || b.alphabet() != mu_b.alphabet()) {
        throw std::invalid_argument("factor measure and system alphabets differ");
    }
}

double ProductSystem::cylinder_measure(const FiniteWord& I1, const FiniteWord& I2) const {
    if (I1.size() != I2.size()) throw std::invalid_argument("cube cylinders need equal depths");
    return mu_a_->cylinder_measure(I1) * mu_b_->cylinder_measure(I2);
}

double ProductSystem::cube_mixing(int k, int n) const {
    // |a1 a2 - e1 e2| is convex in each factor's (a, e) point, so its maximum
    // over all cube pairs is attained at a pair of hull vertices.
    const auto ha = convex_hull(conditional_pairs(*mu_a_, k, n));
    const auto hb = convex_hull(conditional_pairs(*mu_b_, k, n));
    double worst = 0.0;
    for (const auto& [a1, e1] : ha) {
        for (const auto& [a2, e2] : hb) worst = std::max(worst, std::fabs(a1 * a2 - e1 * e2));
    }
    return worst;
}

ProductSystem product_system(const IfsSystem& a, const GibbsBackend& mu_a, const IfsSystem& b,
                             const GibbsBackend& mu_b) {
    return ProductSystem(a, mu_a, b, mu_b);
}

AbbWindow abb_window(const std::vector<double>& p) {
    double H = 0.0, q = 0.0;
    for (double v : p) {
        if (!(v > 0.0)) throw std::invalid_argument("weights must be positive");
        H -= v * std::log(v);
        q += v * v;
    }
    return {1.0 / H, 1.0 / (-std::log(q))};
}

}  // namespace confmix
