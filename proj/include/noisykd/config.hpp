// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/dataset.hpp"
#include "noisykd/trainers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nkd {

struct DataSpec {
    /// Generate synthetic data when no path is set.
    std::optional<std::filesystem::path> path;
    FileFormat format = FileFormat::Csv;
    SyntheticSpec synthetic;
    std::optional<TaskMetric> metric;
};

/// Everything needed to run a method x noise-rate x alpha x seed sweep.
struct ExperimentGrid {
    DataSpec data;
    std::vector<double> noise_rates{0.0, 0.25, 0.5};
    std::vector<Method> methods{Method::NoKd, Method::Vanilla, Method::SelfDistill, Method::CoDistill,
                                Method::CoDistillRefine};
    /// Swept for VANILLA, CD and CD_LR; other methods use base.alpha.
    std::vector<double> alphas{0.25, 0.5, 0.75};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    /// Shared training settings; method, alpha and seed are set per cell.
    TrainConfig base;
    double val_fraction = 0.10;
    double test_fraction = 0.10;
    bool emit_calibration = false;
};

/// One documented key of the flat config format.
struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(ExperimentGrid&, const std::string&)> set;
    std::function<std::string(const ExperimentGrid&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Sets one key; throws InvalidConfig for unknown keys or bad values.
void apply_setting(ExperimentGrid& grid, const std::string& key, const std::string& value);

/// `key = value` lines; `#` starts a comment; lists are comma separated.
ExperimentGrid parse_config(std::istream& is);
ExperimentGrid load_config(const std::filesystem::path& path);

/// Canonical key/value listing in key-table order.
std::vector<std::pair<std::string, std::string>> describe(const ExperimentGrid& grid);

/// Throws InvalidConfig when the grid is empty or any value is out of range.
void validate(const ExperimentGrid& grid);

} // namespace nkd
