#include "confmix/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace confmix {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void allow_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) fail(where + ": unknown key \"" + it.key() + "\"");
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where + ": missing \"" + key + "\"");
    return *it;
}

// Non-negative integer; integral floats such as 1e5 are accepted.
std::uint64_t get_count(const json& v, const std::string& what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const std::int64_t i = v.get<std::int64_t>();
        if (i < 0) fail(what + " must be non-negative");
        return static_cast<std::uint64_t>(i);
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d <= 9007199254740992.0 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
    }
    fail(what + " must be a non-negative integer");
}

double get_number(const json& v, const std::string& what) {
    if (!v.is_number()) fail(what + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(what + " must be finite");
    return d;
}

ExperimentConfig::Kind parse_kind(const json& v) {
    if (!v.is_string()) fail("experiment.kind must be a string");
    const std::string s = v.get<std::string>();
    if (s == "shrinking_target") return ExperimentConfig::Kind::ShrinkingTarget;
    if (s == "recurrence_pure") return ExperimentConfig::Kind::RecurrencePure;
    if (s == "recurrence_modified") return ExperimentConfig::Kind::RecurrenceModified;
    fail("experiment.kind must be shrinking_target, recurrence_pure or recurrence_modified, got \"" + s + "\"");
}

Point parse_point(const json& v, int dim, const std::string& what) {
    if (!v.is_array() || static_cast<int>(v.size()) != dim) fail(what + " must be an array of " + std::to_string(dim) + " numbers");
    if (dim == 1) return Point::d1(get_number(v[0], what));
    return Point::d2(get_number(v[0], what), get_number(v[1], what));
}

// Nearest-rank quantiles of an unsorted sample; null when empty.
json quantiles(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty()) return nullptr;
    std::sort(v.begin(), v.end());
    json out;
    for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
        const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
        char key[8];
        std::snprintf(key, sizeof key, "q%02d", static_cast<int>(std::lround(q * 100)));
        out[key] = v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
    }
    return out;
}

json mean_or_null(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        s += x;
        ++n;
    }
    if (n == 0) return nullptr;
    return s / static_cast<double>(n);
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double ratio_of(const Checkpoint& c) {
    return c.psi_sum > 0.0 ? static_cast<double>(c.count) / c.psi_sum : std::nan("");
}

void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << body;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

bool Region::contains(double x) const {
    for (const auto& [lo, hi] : intervals) {
        if (x >= lo && x <= hi) return true;
    }
    return false;
}

std::string kind_name(ExperimentConfig::Kind kind) {
    switch (kind) {
        case ExperimentConfig::Kind::ShrinkingTarget:
            return "shrinking_target";
        case ExperimentConfig::Kind::RecurrencePure:
            return "recurrence_pure";
        case ExperimentConfig::Kind::RecurrenceModified:
            return "recurrence_modified";
    }
    return {};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) fail("config must be a JSON object");
    allow_keys(j, {"system", "potential", "experiment"}, "config");
    ExperimentConfig cfg;

    cfg.system = require(j, "system", "config");
    if (!cfg.system.is_object()) fail("system must be an object");
    std::optional<IfsSystem> sys;
    try {
        sys.emplace(IfsSystem::from_json(cfg.system));
    } catch (const std::exception& e) {
        fail(std::string("system: ") + e.what());
    }
    try {
        cfg.potential = PotentialSpec::from_json(require(j, "potential", "config"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(std::string("potential: ") + e.what());
    }
    switch (cfg.potential.kind) {
        case PotentialSpec::Kind::Bernoulli:
            if (static_cast<int>(cfg.potential.p.size()) != sys->alphabet()) {
                fail("potential: Bernoulli weights must match the system alphabet");
            }
            try {
                GibbsBackend::bernoulli(cfg.potential.p);
            } catch (const std::exception& e) {
                fail(std::string("potential: ") + e.what());
            }
            break;
        case PotentialSpec::Kind::ClosedFormDensity:
            try {
                GibbsBackend::density(*sys, cfg.potential.density);
            } catch (const std::exception& e) {
                fail(std::string("potential: ") + e.what());
            }
            break;
        case PotentialSpec::Kind::ConformalPower:
            if (cfg.potential.depth < 1 || std::pow(sys->alphabet(), cfg.potential.depth) > 1 << 22) {
                fail("potential: discretization depth must be >= 1 with m^depth <= 2^22");
            }
            if (!(cfg.potential.tau > 0.0)) fail("potential: tau must be positive");
            break;
    }

    const json& ex = require(j, "experiment", "config");
    if (!ex.is_object()) fail("experiment must be an object");
    allow_keys(ex,
               {"kind", "psi", "N", "samples", "seed", "checkpoints", "epsilon", "depth_budget", "min_mass",
                "flag_budget", "orbit_tol", "targets", "regions", "eta"},
               "experiment");
    cfg.kind = parse_kind(require(ex, "kind", "experiment"));
    try {
        const json& p = require(ex, "psi", "experiment");
        if (!p.is_object()) fail("experiment.psi must be an object");
        cfg.psi = RadiusFunction::from_json(p);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(std::string("experiment.psi: ") + e.what());
    }
    cfg.N = get_count(require(ex, "N", "experiment"), "experiment.N");
    if (cfg.N == 0) fail("experiment.N must be positive");
    cfg.samples = get_count(require(ex, "samples", "experiment"), "experiment.samples");
    cfg.seed = get_count(require(ex, "seed", "experiment"), "experiment.seed");

    if (ex.contains("checkpoints")) {
        const json& c = ex.at("checkpoints");
        if (!c.is_array() || c.empty()) fail("experiment.checkpoints must be a non-empty array");
        for (const auto& v : c) {
            std::uint64_t n = get_count(v, "experiment.checkpoints entry");
            if (n == 0 || n > cfg.N) fail("experiment.checkpoints entries must lie in 1..N");
            cfg.checkpoints.push_back(n);
        }
        std::sort(cfg.checkpoints.begin(), cfg.checkpoints.end());
        cfg.checkpoints.erase(std::unique(cfg.checkpoints.begin(), cfg.checkpoints.end()), cfg.checkpoints.end());
    } else {
        cfg.checkpoints = default_checkpoints(cfg.N);
    }

    if (ex.contains("epsilon")) cfg.epsilon = get_number(ex.at("epsilon"), "experiment.epsilon");
    if (!(cfg.epsilon > 0.0)) fail("experiment.epsilon must be positive");
    if (ex.contains("depth_budget")) {
        std::uint64_t d = get_count(ex.at("depth_budget"), "experiment.depth_budget");
        if (d < 1 || d > 10000) fail("experiment.depth_budget must lie in 1..10000");
        cfg.bracket.depth_budget = static_cast<int>(d);
    }
    if (ex.contains("min_mass")) cfg.bracket.min_mass = get_number(ex.at("min_mass"), "experiment.min_mass");
    if (!(cfg.bracket.min_mass >= 0.0)) fail("experiment.min_mass must be non-negative");
    if (ex.contains("flag_budget")) cfg.flag_budget = get_number(ex.at("flag_budget"), "experiment.flag_budget");
    if (!(cfg.flag_budget >= 0.0 && cfg.flag_budget <= 1.0)) fail("experiment.flag_budget must lie in [0, 1]");
    if (ex.contains("orbit_tol")) cfg.orbit_tol = get_number(ex.at("orbit_tol"), "experiment.orbit_tol");
    if (!(cfg.orbit_tol >= 1e-15 && cfg.orbit_tol <= 1e-6)) fail("experiment.orbit_tol must lie in [1e-15, 1e-6]");

    if (cfg.kind == Kind::ShrinkingTarget) {
        const json& t = require(ex, "targets", "experiment");
        if (!t.is_array() || t.empty()) fail("experiment.targets must be a non-empty array of points");
        for (const auto& p : t) cfg.targets.push_back(parse_point(p, sys->dim(), "experiment.targets entry"));
    } else if (ex.contains("targets")) {
        fail("experiment.targets applies to shrinking_target runs only");
    }

    if (ex.contains("regions")) {
        if (sys->dim() != 1) fail("experiment.regions applies to 1-D systems only");
        const json& rs = ex.at("regions");
        if (!rs.is_array()) fail("experiment.regions must be an array");
        for (const auto& r : rs) {
            if (!r.is_object()) fail("experiment.regions entries must be objects");
            allow_keys(r, {"name", "intervals"}, "experiment.regions entry");
            Region reg;
            const json& name = require(r, "name", "experiment.regions entry");
            if (!name.is_string()) fail("region name must be a string");
            reg.name = name.get<std::string>();
            const json& iv = require(r, "intervals", "experiment.regions entry");
            if (!iv.is_array() || iv.empty()) fail("region intervals must be a non-empty array");
            for (const auto& e : iv) {
                if (!e.is_array() || e.size() != 2) fail("region intervals are [lo, hi] pairs");
                double lo = get_number(e[0], "interval end"), hi = get_number(e[1], "interval end");
                if (!(lo <= hi)) fail("region interval needs lo <= hi");
                reg.intervals.emplace_back(lo, hi);
            }
            cfg.regions.push_back(std::move(reg));
        }
    }

    if (ex.contains("eta")) {
        if (cfg.kind != Kind::RecurrencePure) fail("experiment.eta applies to recurrence_pure runs only");
        const json& e = ex.at("eta");
        if (!e.is_object()) fail("experiment.eta must be an object");
        allow_keys(e, {"tau", "values"}, "experiment.eta");
        cfg.eta_tau = get_number(require(e, "tau", "experiment.eta"), "experiment.eta.tau");
        if (!(*cfg.eta_tau > 0.0)) fail("experiment.eta.tau must be positive");
        const json& vals = require(e, "values", "experiment.eta");
        if (!vals.is_array() || vals.empty()) fail("experiment.eta.values must be a non-empty array");
        for (const auto& v : vals) {
            double x = get_number(v, "experiment.eta.values entry");
            if (!(x >= 0.0 && x < 1.0)) fail("experiment.eta.values entries must lie in [0, 1)");
            cfg.eta_values.push_back(x);
        }
    }
    return cfg;
}

json ExperimentConfig::to_json() const {
    json ex{{"kind", kind_name(kind)},
            {"psi", psi.to_json()},
            {"N", N},
            {"samples", samples},
            {"seed", seed},
            {"checkpoints", checkpoints},
            {"epsilon", epsilon},
            {"depth_budget", bracket.depth_budget},
            {"min_mass", bracket.min_mass},
            {"flag_budget", flag_budget},
            {"orbit_tol", orbit_tol}};
    if (!targets.empty()) {
        json t = json::array();
        for (const auto& p : targets) t.push_back(p.dim == 1 ? json::array({p[0]}) : json::array({p[0], p[1]}));
        ex["targets"] = t;
    }
    if (!regions.empty()) {
        json rs = json::array();
        for (const auto& r : regions) {
            json iv = json::array();
            for (const auto& [lo, hi] : r.intervals) iv.push_back({lo, hi});
            rs.push_back({{"name", r.name}, {"intervals", iv}});
        }
        ex["regions"] = rs;
    }
    if (eta_tau) ex["eta"] = {{"tau", *eta_tau}, {"values", eta_values}};
    return json{{"system", system}, {"potential", potential.to_json()}, {"experiment", ex}};
}

std::string records_csv(const std::vector<CountingRecord>& records, double epsilon) {
    std::ostringstream out;
    out << "sample_id,N,count,psi_sum,ball_sum,residual\n";
    for (const auto& r : records) {
        const auto res = bc_residual(r, epsilon);
        for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
            const auto& c = r.checkpoints[i];
            out << r.sample_id << ',' << c.N << ',' << c.count << ',' << fmt(c.psi_sum) << ','
                << (c.ball_sum ? fmt(*c.ball_sum) : std::string()) << ',' << fmt(res[i]) << '\n';
        }
    }
    return out.str();
}

RunArtifacts execute_config(const ExperimentConfig& cfg, unsigned threads) {
    const IfsSystem sys = IfsSystem::from_json(cfg.system);
    const GibbsBackend mu = make_backend(sys, cfg.potential);
    RunOptions ro;
    ro.seed = cfg.seed;
    ro.threads = std::max(1u, threads);
    ro.checkpoints = cfg.checkpoints;
    ro.bracket = cfg.bracket;
    ro.orbit_tol = cfg.orbit_tol;

    std::vector<CountingRecord> recs;
    switch (cfg.kind) {
        case ExperimentConfig::Kind::ShrinkingTarget:
            recs = shrinking_target_run(sys, mu, TargetSequence{cfg.targets}, cfg.psi, cfg.N, cfg.samples, ro);
            break;
        case ExperimentConfig::Kind::RecurrencePure:
            recs = recurrence_pure_run(sys, mu, cfg.psi, cfg.N, cfg.samples, ro);
            break;
        case ExperimentConfig::Kind::RecurrenceModified:
            recs = recurrence_modified_run(sys, mu, cfg.psi, cfg.N, cfg.samples, ro);
            break;
    }

    RunArtifacts art;
    art.csv = records_csv(recs, cfg.epsilon);
    art.echo = cfg.to_json();

    json s;
    s["kind"] = kind_name(cfg.kind);
    s["N"] = cfg.N;
    s["samples"] = cfg.samples;
    s["seed"] = cfg.seed;
    s["backend"] = mu.describe();

    json cps = json::array();
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
        std::vector<double> count, psi_sum, ball, ratio;
        for (const auto& r : recs) {
            const auto& c = r.checkpoints[i];
            count.push_back(static_cast<double>(c.count));
            psi_sum.push_back(c.psi_sum);
            if (c.ball_sum) ball.push_back(*c.ball_sum);
            ratio.push_back(ratio_of(c));
        }
        json row{{"N", cfg.checkpoints[i]},
                 {"count_mean", mean_or_null(count)},
                 {"psi_sum_mean", mean_or_null(psi_sum)},
                 {"ratio_mean", mean_or_null(ratio)}};
        if (!ball.empty()) row["ball_sum_mean"] = mean_or_null(ball);
        cps.push_back(row);
    }
    s["checkpoints"] = cps;

    std::vector<double> final_count, final_ratio, worst;
    std::uint64_t hits = 0, flagged = 0, uncertain = 0;
    for (const auto& r : recs) {
        const auto& c = r.checkpoints.back();
        final_count.push_back(static_cast<double>(c.count));
        final_ratio.push_back(ratio_of(c));
        hits += c.count;
        flagged += r.flagged;
        uncertain += r.uncertain;
        double w = std::nan("");
        for (double v : bc_residual(r, cfg.epsilon)) {
            if (!std::isnan(v)) w = std::isnan(w) ? std::fabs(v) : std::max(w, std::fabs(v));
        }
        worst.push_back(w);
    }
    s["final"] = {{"count_mean", mean_or_null(final_count)},
                  {"count_quantiles", quantiles(final_count)},
                  {"ratio_mean", mean_or_null(final_ratio)},
                  {"ratio_quantiles", quantiles(final_ratio)}};
    std::size_t scored = 0, within = 0;
    for (double w : worst) {
        if (std::isnan(w)) continue;
        ++scored;
        within += w <= 5.0;
    }
    s["residual"] = {{"epsilon", cfg.epsilon},
                     {"samples_scored", scored},
                     {"fraction_max_abs_le_5", scored ? json(static_cast<double>(within) / static_cast<double>(scored))
                                                      : json(nullptr)},
                     {"max_abs_quantiles", quantiles(worst)}};

    if (!cfg.regions.empty()) {
        json rs = json::array();
        for (const auto& reg : cfg.regions) {
            std::vector<double> v;
            for (const auto& r : recs) {
                if (reg.contains(r.x0[0])) v.push_back(ratio_of(r.checkpoints.back()));
            }
            rs.push_back({{"name", reg.name}, {"samples", v.size()}, {"ratio_mean", mean_or_null(v)}});
        }
        s["regions"] = rs;
    }

    if (cfg.eta_tau) {
        json rows = json::array();
        for (double eta : cfg.eta_values) {
            std::vector<double> scale(cfg.N);
            double acc = 0.0;
            for (std::size_t n = 1; n <= cfg.N; ++n) scale[n - 1] = acc += std::pow(cfg.psi(n), (1.0 - eta) * *cfg.eta_tau);
            std::vector<double> w;
            for (const auto& r : recs) {
                double m = std::nan("");
                for (const auto& c : r.checkpoints) {
                    double v = bc_residual_value(static_cast<double>(c.count), *c.ball_sum, scale[c.N - 1], cfg.epsilon);
                    if (!std::isnan(v)) m = std::isnan(m) ? std::fabs(v) : std::max(m, std::fabs(v));
                }
                w.push_back(m);
            }
            rows.push_back({{"eta", eta}, {"max_abs_quantiles", quantiles(w)}});
        }
        s["eta_residuals"] = rows;
    }

    // Boundary-flagged and bracket-decided steps relative to the hits counted.
    const std::uint64_t suspect = flagged + uncertain;
    art.flagged_fraction = suspect == 0 ? 0.0 : static_cast<double>(suspect) / static_cast<double>(std::max<std::uint64_t>(hits, 1));
    art.over_budget = art.flagged_fraction > cfg.flag_budget;
    s["flagged"] = {{"boundary_steps", flagged},
                    {"uncertain_steps", uncertain},
                    {"hits", hits},
                    {"fraction", art.flagged_fraction},
                    {"budget", cfg.flag_budget}};
    art.summary = std::move(s);
    return art;
}

int run_config_file(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                    unsigned threads, std::ostream& err) {
    auto report = [&](const char* kind, const std::string& msg, int code) {
        err << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
        return code;
    };

    ExperimentConfig cfg;
    try {
        std::ifstream f(config_path);
        if (!f) return report("schema", "cannot read config " + config_path, 2);
        json j = json::parse(f);
        if (seed && j.is_object() && j.contains("experiment") && j["experiment"].is_object()) {
            j["experiment"]["seed"] = *seed;
        }
        cfg = ExperimentConfig::from_json(j);
    } catch (const json::exception& e) {
        return report("schema", e.what(), 2);
    } catch (const ConfigError& e) {
        return report("schema", e.what(), 2);
    }

    RunArtifacts art;
    try {
        art = execute_config(cfg, threads);
    } catch (const std::exception& e) {
        return report("runtime", e.what(), 1);
    }

    namespace fs = std::filesystem;
    try {
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        const std::vector<std::pair<std::string, std::string>> files{
            {"results.csv", art.csv},
            {"summary.json", art.summary.dump(2) + "\n"},
            {"config_echo.json", art.echo.dump(2) + "\n"},
        };
        // Stage everything first so a failed write leaves no partial set.
        for (const auto& [name, body] : files) write_file(dir / ("." + name + ".tmp"), body);
        for (const auto& [name, body] : files) fs::rename(dir / ("." + name + ".tmp"), dir / name);
    } catch (const std::exception& e) {
        return report("io", e.what(), 1);
    }

    if (art.over_budget) {
        return report("flag_budget",
                      "flagged fraction " + fmt(art.flagged_fraction) + " exceeds budget " + fmt(cfg.flag_budget), 3);
    }
    return 0;
}

}  // namespace confmix
