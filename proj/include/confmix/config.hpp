#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "confmix/experiments.hpp"

namespace confmix {

// Schema violation in an experiment config (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Named union of closed intervals; summary reports the mean limit estimate
// over samples whose x0 falls in it (1-D systems).
struct Region {
    std::string name;
    std::vector<std::pair<double, double>> intervals;
    bool contains(double x) const;
};

struct ExperimentConfig {
    enum class Kind { ShrinkingTarget, RecurrencePure, RecurrenceModified };

    nlohmann::json system;  // {"builtin": name} or a full system spec
    PotentialSpec potential;
    Kind kind = Kind::RecurrencePure;
    RadiusFunction psi;
    std::size_t N = 0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> checkpoints;  // resolved, never empty
    double epsilon = 0.1;
    BracketOptions bracket;
    double flag_budget = 0.01;
    double orbit_tol = 1e-15;
    std::vector<Point> targets;  // shrinking_target only
    std::vector<Region> regions;
    // Residuals against sum psi(n)^((1 - eta) tau) (recurrence_pure only).
    std::optional<double> eta_tau;
    std::vector<double> eta_values;

    // Throws ConfigError on any schema violation, including unknown keys.
    static ExperimentConfig from_json(const nlohmann::json& j);
    // Fully resolved config; from_json(to_json()) reproduces it.
    nlohmann::json to_json() const;
};

std::string kind_name(ExperimentConfig::Kind kind);

struct RunArtifacts {
    std::string csv;
    nlohmann::json summary;
    nlohmann::json echo;
    double flagged_fraction = 0.0;
    bool over_budget = false;
};

RunArtifacts execute_config(const ExperimentConfig& cfg, unsigned threads);

// CSV with columns sample_id,N,count,psi_sum,ball_sum,residual, one row per
// sample per checkpoint; ball_sum is empty when the run has none.
std::string records_csv(const std::vector<CountingRecord>& records, double epsilon);

// Reads the config, applies the seed override, runs it and writes
// results.csv, summary.json and config_echo.json into out_dir. Returns the
// exit code: 0 success, 2 schema error (nothing written), 3 flag budget
// exceeded (outputs written), 1 any other failure. Errors go to `err` as one
// JSON object.
int run_config_file(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                    unsigned threads, std::ostream& err);

}  // namespace confmix
