// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/config.hpp"
#include "noisykd/dataset.hpp"
#include "noisykd/trainers.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nkd {

struct Cell {
    Method method = Method::NoKd;
    double noise_rate = 0.0;
    double alpha = 0.5;
    std::uint64_t seed = 1;
};

/// Canonical file-name stem, e.g. `CD_LR_rate0.5_alpha0.25_seed3`.
std::string cell_name(const Cell& c, bool with_alpha = true);

/// The three disjoint slices of one run. Train and val carry injected noise at
/// the same rate; test is never corrupted.
struct PreparedData {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
};

/// Builds or loads the dataset, splits it and corrupts train/val. `loaded`
/// short-circuits file loading when the caller already holds the dataset.
PreparedData prepare_data(const ExperimentGrid& grid, double noise_rate, std::uint64_t seed,
                          const LabeledDataset* loaded = nullptr);

/// Full pipeline for one cell; stage failures surface as StageError.
ExperimentResult run_experiment(const Cell& cell, const ExperimentGrid& grid, const LabeledDataset* loaded = nullptr);

/// Outcome of one (method, rate, alpha, seed) run.
struct RunRecord {
    Cell cell;
    std::optional<ExperimentResult> result;
    std::string error;
};

/// The alpha-selected run of one (method, rate, seed).
struct SeedEntry {
    std::uint64_t seed = 0;
    std::optional<ExperimentResult> result;
    std::string error;
};

struct CellReport {
    Method method = Method::NoKd;
    double noise_rate = 0.0;
    std::vector<SeedEntry> seeds;
    std::optional<double> mean_student_clean;
    std::optional<double> mean_teacher_clean;
    std::size_t failed = 0;
};

struct GridReport {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<CellReport> cells;
    std::vector<RunRecord> runs;
    std::size_t failed_runs = 0;

    const CellReport* find(Method m, double rate) const;
};

/// Every cell of the grid, in method, rate, seed, alpha order.
std::vector<Cell> enumerate_cells(const ExperimentGrid& grid);

/// Runs all cells (up to `jobs` at a time), picks alpha per (method, rate,
/// seed) by best noisy-validation metric and averages over seeds.
GridReport run_grid(const ExperimentGrid& grid, std::size_t jobs = 1);

} // namespace nkd
