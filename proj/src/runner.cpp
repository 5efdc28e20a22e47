// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/runner.hpp"

#include "noisykd/error.hpp"
#include "noisykd/rng.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

namespace nkd {

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::vector<double> alphas_for(Method m, const ExperimentGrid& grid) {
    if (m == Method::Vanilla || m == Method::CoDistill || m == Method::CoDistillRefine) return grid.alphas;
    return {grid.base.alpha};
}

std::optional<double> mean(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

} // namespace

std::string cell_name(const Cell& c, bool with_alpha) {
    std::string s = to_string(c.method) + "_rate" + fmt(c.noise_rate);
    if (with_alpha) s += "_alpha" + fmt(c.alpha);
    return s + "_seed" + std::to_string(c.seed);
}

PreparedData prepare_data(const ExperimentGrid& grid, double noise_rate, std::uint64_t seed,
                          const LabeledDataset* loaded) {
    if (!(noise_rate >= 0.0 && noise_rate <= 0.5)) {
        throw StageError("config", "noise rate " + fmt(noise_rate) + " outside [0, 0.5]");
    }
    LabeledDataset full = stage("data", [&] {
        if (loaded != nullptr) return *loaded;
        if (grid.data.path) return load_dataset(*grid.data.path, grid.data.format);
        SyntheticSpec spec = grid.data.synthetic;
        spec.seed = stream_seed(seed, "data-gen");
        return generate_synthetic(spec);
    });
    if (grid.data.metric) full = full.with_metric(*grid.data.metric);

    return stage("split", [&] {
        PreparedData out;
        LabeledDataset rest = full;
        if (grid.test_fraction > 0.0) {
            auto [r, test] = split_train_val(full, {grid.test_fraction, stream_seed(seed, "split")});
            rest = std::move(r);
            out.test = std::move(test);
        }
        const double val_share = grid.val_fraction / (1.0 - grid.test_fraction);
        auto [train, val] = split_train_val(rest, {val_share, stream_seed(seed, "split-val")});
        // Same corruption rate for both splits, independent draws.
        out.train = stage("noise", [&] { return inject_noise(train, noise_rate, stream_seed(seed, "train-noise")); });
        out.val = stage("noise", [&] { return inject_noise(val, noise_rate, stream_seed(seed, "val-noise")); });
        if (grid.test_fraction == 0.0) out.test = val;
        return out;
    });
}

ExperimentResult run_experiment(const Cell& cell, const ExperimentGrid& grid, const LabeledDataset* loaded) {
    TrainConfig cfg = grid.base;
    cfg.method = cell.method;
    cfg.alpha = cell.alpha;
    cfg.seed = cell.seed;
    cfg.keep_calibration = grid.emit_calibration;
    stage("config", [&] { validate(cfg); });

    const PreparedData data = prepare_data(grid, cell.noise_rate, cell.seed, loaded);
    // The clean test slice is only handed to the oracle probe.
    const LabeledDataset* eval = grid.test_fraction > 0.0 ? &data.test : nullptr;
    const TrainInputs in = make_inputs(data.train, data.val, eval);
    return stage("train", [&] { return train(in, cfg); });
}

const CellReport* GridReport::find(Method m, double rate) const {
    for (const auto& c : cells) {
        if (c.method == m && c.noise_rate == rate) return &c;
    }
    return nullptr;
}

std::vector<Cell> enumerate_cells(const ExperimentGrid& grid) {
    std::vector<Cell> cells;
    for (Method m : grid.methods) {
        for (double r : grid.noise_rates) {
            for (std::uint64_t s : grid.seeds) {
                for (double a : alphas_for(m, grid)) cells.push_back({m, r, a, s});
            }
        }
    }
    return cells;
}

GridReport run_grid(const ExperimentGrid& grid, std::size_t jobs) {
    validate(grid);
    GridReport report;
    report.config = describe(grid);

    std::optional<LabeledDataset> loaded;
    if (grid.data.path) loaded = stage("data", [&] { return load_dataset(*grid.data.path, grid.data.format); });
    const LabeledDataset* shared = loaded ? &*loaded : nullptr;

    const auto cells = enumerate_cells(grid);
    report.runs.resize(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            RunRecord& rec = report.runs[i];
            rec.cell = cells[i];
            try {
                rec.result = run_experiment(cells[i], grid, shared);
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::size_t i = 0;
    for (Method m : grid.methods) {
        const auto alphas = alphas_for(m, grid);
        for (double r : grid.noise_rates) {
            CellReport cell;
            cell.method = m;
            cell.noise_rate = r;
            std::vector<double> students, teachers;
            for (std::uint64_t s : grid.seeds) {
                SeedEntry entry;
                entry.seed = s;
                const RunRecord* chosen = nullptr;
                for (std::size_t a = 0; a < alphas.size(); ++a, ++i) {
                    const RunRecord& rec = report.runs[i];
                    if (!rec.result) {
                        ++report.failed_runs;
                        if (entry.error.empty()) entry.error = rec.error;
                        continue;
                    }
                    // Selection sees only the noisy-validation metric; ties keep the earlier alpha.
                    if (chosen == nullptr || rec.result->best_val_metric > chosen->result->best_val_metric) {
                        chosen = &rec;
                    }
                }
                if (chosen != nullptr) {
                    entry.result = chosen->result;
                    entry.error.clear();
                    students.push_back(entry.result->student_clean_metric);
                    if (entry.result->teacher_clean_metric) teachers.push_back(*entry.result->teacher_clean_metric);
                } else {
                    ++cell.failed;
                }
                cell.seeds.push_back(std::move(entry));
            }
            cell.mean_student_clean = mean(students);
            cell.mean_teacher_clean = mean(teachers);
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

} // namespace nkd
