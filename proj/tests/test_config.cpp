#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "confmix/config.hpp"

using namespace confmix;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kSource = CONFMIX_SOURCE_DIR;

json load(const std::string& path) {
    std::ifstream f(path);
    return json::parse(f);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("confmix_test_" + name);
    fs::remove_all(p);
    return p;
}

json small_config() {
    return json::parse(R"({
      "system": {"builtin": "cantor"},
      "potential": {"type": "bernoulli", "p": [0.5, 0.5]},
      "experiment": {"kind": "recurrence_pure", "psi": {"type": "constant", "c": 0.5555555555555556},
                     "N": 2000, "samples": 6, "seed": 11,
                     "regions": [{"name": "left", "intervals": [[0.0, 0.5]]}]}
    })");
}

void write_json(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << j.dump(2);
}

int run_cli(const std::string& args) {
    const char* cli = std::getenv("CONFMIX_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "CONFMIX_CLI is not set");
    int rc = std::system((std::string(cli) + " " + args + " 2>/dev/null").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("shipped configs parse and round trip") {
    for (const char* name : {"7.1", "7.2", "ABB", "B.2"}) {
        ExperimentConfig cfg = ExperimentConfig::from_json(load(kSource + "/configs/" + name + ".json"));
        json echo = cfg.to_json();
        CHECK(ExperimentConfig::from_json(echo).to_json() == echo);
    }
}

TEST_CASE("schema violations") {
    auto broken = [](auto edit) {
        json j = small_config();
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"].erase("seed"); })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["kind"] = "other"; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["N"] = -5; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["N"] = 0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["Nn"] = 5; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["checkpoints"] = {10, 5000}; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["potential"]["p"] = {0.2, 0.3, 0.5}; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["kind"] = "shrinking_target"; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["system"] = {{"builtin", "nope"}}; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["psi"] = {{"type", "x"}}; })),
                    ConfigError);
    // Integral floats are accepted for counts.
    CHECK(ExperimentConfig::from_json(broken([](json& j) { j["experiment"]["N"] = 1e3; })).N == 1000);
}

TEST_CASE("CSV layout") {
    ExperimentConfig cfg = ExperimentConfig::from_json(small_config());
    RunArtifacts a = execute_config(cfg, 1);
    std::istringstream in(a.csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "sample_id,N,count,psi_sum,ball_sum,residual");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6 * 2);  // checkpoints 1000 and 2000
    CHECK(a.summary.at("regions")[0].at("samples").get<std::size_t>() <= 6);
    CHECK_FALSE(a.over_budget);
}

TEST_CASE("zero samples give a header-only CSV") {
    json j = small_config();
    j["experiment"]["samples"] = 0;
    fs::path dir = scratch("zero");
    write_json(dir / "cfg.json", j);
    CHECK(run_config_file((dir / "cfg.json").string(), (dir / "out").string(), std::nullopt, 1, std::cerr) == 0);
    CHECK(slurp(dir / "out" / "results.csv") == "sample_id,N,count,psi_sum,ball_sum,residual\n");
    CHECK(fs::exists(dir / "out" / "summary.json"));
}

TEST_CASE("reruns are byte-identical and the echo reproduces the outputs") {
    fs::path dir = scratch("rerun");
    write_json(dir / "cfg.json", small_config());
    REQUIRE(run_config_file((dir / "cfg.json").string(), (dir / "a").string(), std::nullopt, 1, std::cerr) == 0);
    REQUIRE(run_config_file((dir / "cfg.json").string(), (dir / "b").string(), std::nullopt, 2, std::cerr) == 0);
    REQUIRE(run_config_file((dir / "a" / "config_echo.json").string(), (dir / "c").string(), std::nullopt, 1,
                            std::cerr) == 0);
    for (const char* f : {"results.csv", "summary.json", "config_echo.json"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }
    // The seed override changes the samples and is echoed.
    REQUIRE(run_config_file((dir / "cfg.json").string(), (dir / "d").string(), 12, 1, std::cerr) == 0);
    CHECK(slurp(dir / "a" / "results.csv") != slurp(dir / "d" / "results.csv"));
    CHECK(load((dir / "d" / "config_echo.json").string())["experiment"]["seed"] == 12);
}

TEST_CASE("flag budget overrun exits 3 and keeps the outputs") {
    json j = json::parse(R"({
      "system": {"builtin": "cantor"},
      "potential": {"type": "bernoulli", "p": [0.3, 0.7]},
      "experiment": {"kind": "recurrence_modified", "psi": {"type": "power", "c": 1.0, "beta": 0.5},
                     "N": 2000, "samples": 4, "seed": 3, "depth_budget": 3, "flag_budget": 0.0}
    })");
    fs::path dir = scratch("budget");
    write_json(dir / "cfg.json", j);
    std::ostringstream err;
    CHECK(run_config_file((dir / "cfg.json").string(), (dir / "out").string(), std::nullopt, 1, err) == 3);
    CHECK(json::parse(err.str()).at("error") == "flag_budget");
    CHECK(fs::exists(dir / "out" / "results.csv"));
}

TEST_CASE("CLI: malformed config exits 2 without outputs") {
    fs::path dir = scratch("malformed");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{\"system\": ";
    CHECK(run_cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "out"));
    json j = small_config();
    j["experiment"]["samples"] = -1;
    write_json(dir / "neg.json", j);
    CHECK(run_cli("run --config " + (dir / "neg.json").string() + " --out " + (dir / "out").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("CLI: run and list_examples") {
    fs::path dir = scratch("cli");
    write_json(dir / "cfg.json", small_config());
    CHECK(run_cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "out").string() +
                  " --threads 2 --seed 5") == 0);
    CHECK(fs::exists(dir / "out" / "results.csv"));
    CHECK(run_cli("list_examples > " + (dir / "list.txt").string()) == 0);
    std::istringstream in(slurp(dir / "list.txt"));
    std::string line;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        std::istringstream cols(line);
        std::string name, path;
        std::getline(cols, name, '\t');
        std::getline(cols, path, '\t');
        names.push_back(name);
        CHECK(fs::exists(path));
    }
    CHECK(names == std::vector<std::string>{"7.1", "7.2", "ABB", "B.2"});
    CHECK(run_cli("frobnicate") != 0);
}
