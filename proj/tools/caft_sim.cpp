#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "caft/errors.hpp"
#include "caft/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Fat-tree flow simulator for CAFT, Expeditus, ECMP and Optimal path selection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    int jobs = 0;
    auto* run = app.add_subcommand("run", "run every (scheme, load, failures, seed) cell of a config");
    run->add_option("config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", output_override, "output directory (overrides config and CAFT_OUTPUT_DIR)");
    run->add_option("-j,--jobs", jobs, "parallel runs (overrides config)")->check(CLI::PositiveNumber);

    std::string dir;
    bool csv = false;
    auto* sum = app.add_subcommand("summarize", "aggregate flows_*.csv files of a directory");
    sum->add_option("dir", dir, "directory with per-run CSVs")->required();
    sum->add_flag("--csv", csv, "print CSV instead of a table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = caft::ExperimentConfig::load(config_path);
            if (const char* env = std::getenv("CAFT_OUTPUT_DIR"); env && *env) config.output_dir = env;
            if (!output_override.empty()) config.output_dir = output_override;
            if (jobs > 0) config.jobs = jobs;
            const auto out = caft::run_experiment(config, &std::cerr);
            caft::write_summary_table(std::cout, out.summary);
            fmt::print(stderr, "wrote {} run CSVs and summary to {}\n", out.csvs.size(), config.output_dir.string());
        } else {
            const auto rows = caft::summarize(caft::flow_csvs_in(dir), &std::cerr);
            if (csv)
                caft::write_summary_csv(std::cout, rows);
            else
                caft::write_summary_table(std::cout, rows);
        }
    } catch (const caft::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const caft::ParseError& e) {
        fmt::print(stderr, "parse error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
