// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/runner.hpp"
#include "noisykd/trainers.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace nkd {

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const ExperimentResult& r);

/// report.json content. `timestamp` lands in `generated_at`, the only field
/// allowed to differ between two runs of the same config.
nlohmann::json to_json(const GridReport& report, const std::string& timestamp);

/// `epoch,train_loss,val_loss,val_metric,clean_val_metric`
void write_curve_csv(std::ostream& os, const std::vector<EpochRecord>& epochs);

/// Summary CSV: one row per method (and per teacher where present), one
/// column per noise rate, seed-mean clean scores x 100.
void write_table_csv(std::ostream& os, const GridReport& report);

/// Writes report.json, table.csv and curves/<cell>.csv (plus calibration/ when
/// calibration rows exist). Throws InvalidInput for an empty report, before
/// anything is written, and IoError naming the failing path.
void emit_report(const GridReport& report, const std::filesystem::path& out_dir, const std::string& timestamp);

/// Human-readable summary of a report.json document.
void print_summary(std::ostream& os, const nlohmann::json& report);

} // namespace nkd
