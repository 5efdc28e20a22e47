// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

// nkd: noisy-label knowledge-distillation experiment runner.

#include "noisykd/config.hpp"
#include "noisykd/dataset.hpp"
#include "noisykd/error.hpp"
#include "noisykd/report.hpp"
#include "noisykd/rng.hpp"
#include "noisykd/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kPartialFailure = 2, kFatal = 3 };

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int run_command(const std::string& config_path, const std::map<std::string, std::string>& overrides,
                std::size_t jobs, const std::string& out_dir) {
    nkd::ExperimentGrid grid;
    try {
        if (!config_path.empty()) grid = nkd::load_config(config_path);
        for (const auto& [key, value] : overrides) nkd::apply_setting(grid, key, value);
        nkd::validate(grid);
    } catch (const nkd::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    const auto cells = nkd::enumerate_cells(grid);
    std::cerr << "running " << cells.size() << " runs with " << jobs << " job(s)\n";
    const nkd::GridReport report = nkd::run_grid(grid, jobs);
    for (const auto& r : report.runs) {
        if (!r.result) {
            std::cerr << "run " << nkd::cell_name(r.cell) << " failed: " << r.error << '\n';
        } else {
            for (const auto& w : r.result->warnings) std::cerr << "run " << nkd::cell_name(r.cell) << ": " << w << '\n';
        }
    }
    nkd::emit_report(report, out_dir, utc_timestamp());
    std::ifstream is(std::filesystem::path(out_dir) / "report.json");
    nkd::print_summary(std::cout, nlohmann::json::parse(is));
    std::cout << "\nwrote " << out_dir << "/report.json, table.csv, curves/\n";
    return report.failed_runs > 0 ? kPartialFailure : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge distillation under label noise: experiment runner"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment grid and write report.json, table.csv and curves/");
    std::string config_path;
    std::size_t jobs = 1;
    std::string out_dir = "results";
    run->add_option("--config", config_path, "flat key = value config file");
    run->add_option("--jobs", jobs, "runs executed concurrently")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "output directory");
    std::map<std::string, std::string> overrides;
    for (const auto& key : nkd::config_keys()) {
        run->add_option_function<std::string>(
               "--" + key.name, [&overrides, name = key.name](const std::string& v) { overrides[name] = v; },
               key.help + " [default: " + key.get(nkd::ExperimentGrid{}) + "]")
            ->group("Config keys (override the file)");
    }

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
    nkd::SyntheticSpec spec;
    std::string kind = "blobs", format, out_file;
    double noise = 0.0;
    gen->add_option("--kind", kind, "blobs | moons | bow")->capture_default_str();
    gen->add_option("--n", spec.n, "sample count")->capture_default_str();
    gen->add_option("--dim", spec.dim, "feature dimension")->capture_default_str();
    gen->add_option("--classes", spec.classes, "class count")->capture_default_str();
    gen->add_option("--separation", spec.separation, "class separation")->capture_default_str();
    gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
    gen->add_option("--noise", noise, "label noise rate in [0, 0.5] (recorded in the dump's oracle section)");
    gen->add_option("--format", format, "csv | jsonl | dump (default: from the extension)");
    gen->add_option("--out", out_file, "output file")->required();

    auto* inspect = app.add_subcommand("inspect", "summarize a report.json");
    std::string result_path;
    inspect->add_option("--result", result_path, "report.json to read")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return run_command(config_path, overrides, jobs, out_dir);
        if (*gen) {
            spec.kind = nkd::synthetic_kind_from_string(kind);
            auto ds = nkd::generate_synthetic(spec);
            if (noise > 0.0) ds = nkd::inject_noise(ds, noise, nkd::stream_seed(spec.seed, "train-noise"));
            const auto fmt = format.empty() ? nkd::file_format_from_path(out_file) : nkd::file_format_from_string(format);
            nkd::save_dataset(ds, out_file, fmt);
            std::cout << "wrote " << ds.size() << " samples to " << out_file << '\n';
            return kOk;
        }
        if (*inspect) {
            std::ifstream is(result_path);
            if (!is) throw nkd::IoError("cannot open " + result_path);
            nkd::print_summary(std::cout, nlohmann::json::parse(is));
            return kOk;
        }
    } catch (const nkd::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return kFatal;
    }
    return kOk;
}
