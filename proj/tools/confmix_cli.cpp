#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "confmix/config.hpp"
#include "confmix/experiments.hpp"

#ifndef CONFMIX_CONFIG_DIR
#define CONFMIX_CONFIG_DIR "configs"
#endif

int main(int argc, char** argv) {
    CLI::App app{"Shrinking-target and recurrence experiments on self-conformal systems"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--seed", seed, "overrides the config seed");
    run->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));

    auto* list = app.add_subcommand("list_examples", "list named examples and their configs");

    std::string name, report_path;
    confmix::ExampleOptions eopt;
    auto* example = app.add_subcommand("example", "run a named example and print its comparison report");
    example->add_option("name", name, "example name")->required();
    example->add_option("--out", report_path, "write the report here instead of stdout");
    example->add_option("--seed", eopt.seed, "master seed");
    example->add_option("--threads", eopt.threads, "worker threads")->check(CLI::Range(1u, 1024u));
    example->add_option("--scale", eopt.scale, "shrink sample counts and orbit lengths")->check(CLI::Range(1e-6, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (*run) return confmix::run_config_file(config_path, out_dir, seed, threads, std::cerr);

    if (*list) {
        for (const auto& [n, desc] : confmix::example_catalog()) {
            const std::string path = std::string(CONFMIX_CONFIG_DIR) + "/" + n + ".json";
            std::printf("%s\t%s\t%s\n", n.c_str(), path.c_str(), desc.c_str());
        }
        return 0;
    }

    try {
        const nlohmann::json report = confmix::run_named_example(name, eopt);
        if (report_path.empty()) {
            std::cout << report.dump(2) << '\n';
        } else {
            std::ofstream f(report_path);
            f << report.dump(2) << '\n';
            if (!f) throw std::runtime_error("cannot write " + report_path);
        }
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "runtime"}, {"message", e.what()}, {"exit_code", 1}}.dump() << '\n';
        return 1;
    }
    return 0;
}
