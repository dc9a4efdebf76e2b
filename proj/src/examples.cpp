#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "confmix/experiments.hpp"

namespace confmix {

using nlohmann::json;

namespace {

json comparison(const std::string& quantity, double observed, json reference, double lo, double hi) {
    return json{{"quantity", quantity},
                {"observed", observed},
                {"reference", std::move(reference)},
                {"band", json::array({lo, hi})},
                {"within", observed >= lo && observed <= hi}};
}

std::size_t scaled(std::size_t full, double scale, std::size_t floor) {
    return std::max(floor, static_cast<std::size_t>(std::llround(static_cast<double>(full) * scale)));
}

void check_scale(const ExampleOptions& opt) {
    if (!(opt.scale > 0.0 && opt.scale <= 1.0)) throw std::invalid_argument("example scale must lie in (0, 1]");
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double final_ratio(const CountingRecord& r) {
    const auto& c = r.checkpoints.back();
    return static_cast<double>(c.count) / c.psi_sum;
}

json example_7_1(const ExampleOptions& opt) {
    const IfsSystem sys = IfsSystem::builtin("cantor");
    const GibbsBackend mu = GibbsBackend::bernoulli({0.5, 0.5});
    const double radius = 1.0 / 3.0 + 2.0 / 9.0;
    const RadiusFunction psi = RadiusFunction::constant(radius);
    const std::size_t N = scaled(100000, opt.scale, 1000), samples = scaled(200, opt.scale, 20);

    RunOptions ro;
    ro.seed = opt.seed;
    ro.threads = opt.threads;
    const auto recs = recurrence_pure_run(sys, mu, psi, N, samples, ro);
    std::vector<double> outer, inner;
    for (const auto& r : recs) {
        const double x = r.x0[0];
        if (x <= 1.0 / 9.0 || x >= 8.0 / 9.0) outer.push_back(final_ratio(r));
        if ((x >= 2.0 / 9.0 && x <= 1.0 / 3.0) || (x >= 2.0 / 3.0 && x <= 7.0 / 9.0)) inner.push_back(final_ratio(r));
    }

    const MeasureBracket b0 = ball_measure(sys, mu, Point::d1(0.0), radius);
    const MeasureBracket b1 = ball_measure(sys, mu, Point::d1(2.0 / 9.0), radius);
    // Same points as the run's psi_sum, so the mean matches it and the standard error applies.
    const Estimate integral = recurrence_integral_mc(sys, mu, radius, 4096, mix64(opt.seed ^ 0x696e74656772616cULL));
    const double per_step = recs.empty() ? integral.value : recs[0].checkpoints.back().psi_sum / static_cast<double>(N);
    const Estimate r30 = recurrence_set_mc(sys, mu, 30, radius, scaled(100000, opt.scale, 10000), opt.seed + 30,
                                           opt.threads);

    json cmp = json::array();
    cmp.push_back(comparison("limit mean on [0,1/9] u [8/9,1]", mean(outer), 0.8, 0.75, 0.85));
    cmp.push_back(comparison("limit mean on [2/9,1/3] u [2/3,7/9]", mean(inner), 1.2, 1.15, 1.25));
    cmp.push_back(comparison("mu(B(0, psi))", b0.mid(), 0.5, 0.5 - 1e-6, 0.5 + 1e-6));
    cmp.push_back(comparison("mu(B(2/9, psi))", b1.mid(), 0.75, 0.75 - 1e-6, 0.75 + 1e-6));
    cmp.push_back(comparison("bracket width at 0", b0.width(), nullptr, 0.0, 1e-6));
    cmp.push_back(comparison("bracket width at 2/9", b1.width(), nullptr, 0.0, 1e-6));
    cmp.push_back(comparison("sum mu(R_n) / N", per_step, 0.625, 0.625 - 4 * integral.stderr_,
                             0.625 + 4 * integral.stderr_));
    cmp.push_back(comparison("Monte Carlo mu(R_30)", r30.value, 0.625, 0.625 - 4 * r30.stderr_, 0.625 + 4 * r30.stderr_));

    return json{{"name", "7.1"},
                {"N", N},
                {"samples", samples},
                {"seed", opt.seed},
                {"region_counts", {{"outer", outer.size()}, {"inner", inner.size()}}},
                {"recurrence_integral_stderr", integral.stderr_},
                {"mu_R30_stderr", r30.stderr_},
                {"comparisons", cmp}};
}

json example_7_2(const ExampleOptions& opt) {
    const IfsSystem sys = IfsSystem::builtin("example_7_2");
    const GibbsBackend spectral = eigen_solve(sys, PotentialSpec::conformal_power(1.0, 10), 10);
    const SpectralData& sd = *spectral.spectral_data();
    double h_err = 0.0;
    for (std::size_t i = 0; i < sd.h.size(); ++i) {
        h_err = std::max(h_err, std::fabs(sd.h[i] - 1.0 / (std::log(2.0) * (1.0 + sd.anchors[i]))));
    }

    const GibbsBackend mu = GibbsBackend::density(sys, DensityKind::GaussLike);
    const RadiusFunction psi = RadiusFunction::power(1.0, 0.5);
    const std::size_t N = scaled(100000, opt.scale, 1000), samples = scaled(100, opt.scale, 20);
    RunOptions ro;
    ro.seed = opt.seed;
    ro.threads = opt.threads;
    const auto recs = recurrence_pure_run(sys, mu, psi, N, samples, ro);
    std::size_t close = 0;
    for (const auto& r : recs) close += std::fabs(final_ratio(r) - 2.0 * std::log(2.0) / (1.0 + r.x0[0])) <= 0.15;
    const double frac = recs.empty() ? std::nan("") : static_cast<double>(close) / static_cast<double>(recs.size());

    // Residuals against the error scale sum psi(n)^((1 - eta) tau), tau = 1.
    json eta_rows = json::array();
    for (double eta : {0.0, 0.05, 0.1}) {
        std::vector<double> psi_eta(N);
        double acc = 0.0;
        for (std::size_t n = 1; n <= N; ++n) psi_eta[n - 1] = acc += std::pow(psi(n), 1.0 - eta);
        std::vector<double> worst;
        for (const auto& r : recs) {
            double w = 0.0;
            for (const auto& c : r.checkpoints) {
                const double v = bc_residual_value(static_cast<double>(c.count), *c.ball_sum, psi_eta[c.N - 1], 0.1);
                if (!std::isnan(v)) w = std::max(w, std::fabs(v));
            }
            worst.push_back(w);
        }
        std::sort(worst.begin(), worst.end());
        eta_rows.push_back({{"eta", eta},
                            {"median_max_abs_residual", worst.empty() ? 0.0 : worst[worst.size() / 2]},
                            {"max_abs_residual", worst.empty() ? 0.0 : worst.back()}});
    }

    std::vector<std::pair<double, double>> series;
    for (int n = 2; n <= 6; ++n) series.emplace_back(n, mixing_coeff_cylinders(spectral, 8, n));
    json phi = json::array();
    bool decreasing = true;
    for (std::size_t i = 0; i < series.size(); ++i) {
        phi.push_back({{"n", series[i].first}, {"phi", series[i].second}});
        if (i > 0 && !(series[i].second < series[i - 1].second)) decreasing = false;
    }
    RateFit fit = fit_exponential_rate(series);

    json cmp = json::array();
    cmp.push_back(comparison("leading eigenvalue R", sd.R, 1.0, 1.0 - 1e-6, 1.0 + 1e-6));
    cmp.push_back(comparison("sup |h - 1/(log 2 (1+x))| at anchors", h_err, 0.0, 0.0, 1e-3));
    cmp.push_back(comparison("fraction of samples within 0.15 of 2 log 2/(1+x)", frac, 1.0, 0.85, 1.0));
    cmp.push_back(comparison("mixing fit r^2", fit.r_squared, nullptr, 0.95, 1.0));
    cmp.push_back(comparison("mixing fit gamma", fit.gamma(), nullptr, 0.0, 1.0));
    return json{{"name", "7.2"},
                {"N", N},
                {"samples", samples},
                {"seed", opt.seed},
                {"eigen", {{"depth", sd.depth}, {"R", sd.R}, {"R_adjoint", sd.R_adjoint}, {"residual", sd.residual}}},
                {"mixing", {{"depth", 8}, {"series", phi}, {"strictly_decreasing", decreasing}, {"gamma", fit.gamma()},
                            {"r_squared", fit.r_squared}}},
                {"eta_residuals", eta_rows},
                {"comparisons", cmp}};
}

json example_abb(const ExampleOptions& opt) {
    const std::vector<double> p{0.2, 0.8};
    const IfsSystem sys = IfsSystem::builtin("cantor");
    const GibbsBackend mu = GibbsBackend::bernoulli(p);
    const AbbWindow win = abb_window(p);
    const RadiusFunction psi = RadiusFunction::power_log(win.alpha());
    const std::size_t N = scaled(1000000, opt.scale, 10000), samples = scaled(200, opt.scale, 20);

    RunOptions ro;
    ro.seed = opt.seed;
    ro.threads = opt.threads;
    const auto recs = recurrence_pure_run(sys, mu, psi, N, samples, ro);
    std::uint64_t max_count = 0;
    double mean_count = 0.0;
    for (const auto& r : recs) {
        max_count = std::max(max_count, r.checkpoints.back().count);
        mean_count += static_cast<double>(r.checkpoints.back().count) / static_cast<double>(recs.size());
    }
    json partial = json::array();
    bool increasing = true;
    double sum_R = 0.0;
    if (!recs.empty()) {
        const auto& cps = recs[0].checkpoints;
        for (std::size_t i = 0; i < cps.size(); ++i) {
            partial.push_back({{"N", cps[i].N}, {"sum_mu_R", cps[i].psi_sum}});
            if (i > 0 && !(cps[i].psi_sum > cps[i - 1].psi_sum)) increasing = false;
        }
        sum_R = cps.back().psi_sum;
    }

    // Tails of sum mu(B(x, psi(n))) past 10^5 for the first 20 sampled x,
    // truncated at 10^10 (a lower bound on the full tail).
    BracketOptions deep;
    deep.min_mass = 1e-40;
    const std::uint64_t tail_from = 100000, tail_to = 10000000000ULL;
    json tails = json::array();
    double worst_tail = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(20, recs.size()); ++i) {
        const MeasureBracket t = ball_sum_range(sys, mu, recs[i].x0, psi, tail_from, tail_to, deep);
        tails.push_back({{"x", recs[i].x0[0]}, {"lower", t.lower}, {"upper", t.upper}});
        worst_tail = std::max(worst_tail, t.lower);
    }

    json cmp = json::array();
    cmp.push_back(comparison("sum mu(R_n) at N", sum_R, "diverges", 10.0, INFINITY));
    cmp.push_back(comparison("max final count", static_cast<double>(max_count), "bounded", 0.0, 50.0));
    cmp.push_back(comparison("largest tail lower bound past 1e5", worst_tail, "converges", 0.0, 1e-3));
    return json{{"name", "ABB"},
                {"weights", p},
                {"window", {{"lower", win.lower}, {"upper", win.upper}, {"alpha", win.alpha()}}},
                {"N", N},
                {"samples", samples},
                {"seed", opt.seed},
                {"mean_final_count", mean_count},
                {"sum_mu_R", partial},
                {"sum_mu_R_increasing", increasing},
                {"tails", {{"from", tail_from}, {"to", tail_to}, {"per_point", tails}}},
                {"comparisons", cmp}};
}

json example_b2(const ExampleOptions&) {
    const IfsSystem sys = IfsSystem::builtin("sierpinski");
    const GibbsBackend mu = GibbsBackend::bernoulli({0.1, 0.8, 0.1});
    json doubling = json::array();
    bool monotone = true;
    double prev = 0.0, last = 0.0;
    for (int n = 2; n <= 8; ++n) {
        // x_n = pi(2 1^n 2^inf), radius between the scales of K_{2 1^n} and K_{2 1^(n+1)}.
        std::vector<Symbol> pre{1};
        pre.insert(pre.end(), static_cast<std::size_t>(n), Symbol{0});
        const Point x = coding_map_pi(sys, SymbolStream::periodic(3, FiniteWord(pre), FiniteWord(std::vector<Symbol>{1})),
                                      1e-15);
        const double r = 0.75 * std::pow(2.0, -(n + 1));
        const DoublingRatio d = doubling_ratio(sys, mu, x, r);
        doubling.push_back({{"n", n}, {"x", {x[0], x[1]}}, {"r", r}, {"ratio", d.ratio}, {"lower", d.lower},
                            {"upper", d.upper}});
        if (n > 2 && !(d.ratio > prev)) monotone = false;
        prev = last = d.ratio;
    }

    const IfsSystem lines = IfsSystem::builtin("two_line_cantor");
    const GibbsBackend mu2 = GibbsBackend::bernoulli(std::vector<double>(static_cast<std::size_t>(lines.alphabet()),
                                                                         1.0 / lines.alphabet()));
    json probe = json::array();
    double probe_min = INFINITY;
    for (int k = 3; k <= 10; ++k) {
        const double v = hyperplane_decay_probe(lines, mu2, lines.base_point(), 0.5, Point::d2(1.0, 0.0),
                                                lines.base_point()[0], std::pow(3.0, -k));
        probe.push_back({{"k", k}, {"value", v}});
        probe_min = std::min(probe_min, v);
    }

    json cmp = json::array();
    cmp.push_back(comparison("doubling ratio monotone over n = 2..8", monotone ? 1.0 : 0.0, nullptr, 1.0, 1.0));
    cmp.push_back(comparison("doubling ratio at n = 8", last, "unbounded", 100.0, INFINITY));
    cmp.push_back(comparison("min hyperplane probe, rho = 3^-k, k = 3..10", probe_min, "no decay", 0.4, 1.0));
    return json{{"name", "B.2"},
                {"weights", {0.1, 0.8, 0.1}},
                {"doubling", doubling},
                {"hyperplane_probe", probe},
                {"comparisons", cmp}};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> example_catalog() {
    return {
        {"7.1", "uniform Cantor recurrence with psi = 1/3 + 2/9: region limits 4/5 and 6/5"},
        {"7.2", "Gauss-like Moebius system: eigendata, recurrence limit 2 log 2/(1+x), cylinder mixing"},
        {"ABB", "Cantor with weights (0.2, 0.8): divergent sum of mu(R_n) with bounded recurrence counts"},
        {"B.2", "weighted Sierpinski doubling failure and two-line Cantor hyperplane probe"},
    };
}

json run_named_example(const std::string& name, const ExampleOptions& opt) {
    check_scale(opt);
    if (name == "7.1") return example_7_1(opt);
    if (name == "7.2") return example_7_2(opt);
    if (name == "ABB") return example_abb(opt);
    if (name == "B.2") return example_b2(opt);
    throw std::invalid_argument("unknown example: " + name);
}

}  // namespace confmix
