// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/report.hpp"

#include "noisykd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

namespace nkd {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::string percent(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
    return buf;
}

std::string rate_label(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r * 100.0);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + p.string());
    return os;
}

void close_out(std::ofstream& os, const std::filesystem::path& p) {
    os.close();
    if (!os) throw IoError("write failed: " + p.string());
}

json to_json(const RelabelStats& s) {
    return json{{"performed", s.performed},
                {"skipped_reason", s.skipped_reason},
                {"after_epoch", s.after_epoch},
                {"flagged_count", s.flagged_count},
                {"changed_count", s.changed_count},
                {"flag_precision", number(s.flag_precision)},
                {"flag_recall", number(s.flag_recall)},
                {"agreement_before", number(s.agreement_before)},
                {"agreement_after", number(s.agreement_after)}};
}

} // namespace

json to_json(const EpochRecord& r) {
    return json{{"epoch", r.epoch},
                {"train_loss", number(r.train_loss)},
                {"val_loss", number(r.val_loss)},
                {"val_metric", number(r.val_metric)},
                {"clean_val_loss", number(r.clean_val_loss)},
                {"clean_val_metric", number(r.clean_val_metric)},
                {"teacher_val_loss", number(r.teacher_val_loss)},
                {"teacher_val_metric", number(r.teacher_val_metric)},
                {"teacher_clean_val_metric", number(r.teacher_clean_val_metric)}};
}

json to_json(const ExperimentResult& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) epochs.push_back(to_json(e));
    json out{{"method", to_string(r.method)},
             {"alpha", r.alpha},
             {"seed", r.seed},
             {"best_epoch", r.best_epoch},
             {"best_val_metric", number(r.best_val_metric)},
             {"student_clean_metric", number(r.student_clean_metric)},
             {"teacher_clean_metric", number(r.teacher_clean_metric)},
             {"relabel", r.relabel ? to_json(*r.relabel) : json(nullptr)},
             {"warnings", r.warnings},
             {"epochs", std::move(epochs)}};
    if (!r.teacher_epochs.empty()) {
        json t = json::array();
        for (const auto& e : r.teacher_epochs) t.push_back(to_json(e));
        out["teacher_epochs"] = std::move(t);
    }
    return out;
}

json to_json(const GridReport& report, const std::string& timestamp) {
    json config = json::object();
    for (const auto& [k, v] : report.config) config[k] = v;

    json cells = json::array();
    for (const auto& c : report.cells) {
        json seeds = json::array();
        for (const auto& s : c.seeds) {
            json e{{"seed", s.seed}};
            if (s.result) {
                e["alpha"] = s.result->alpha;
                e["student_clean_metric"] = number(s.result->student_clean_metric);
                e["teacher_clean_metric"] = number(s.result->teacher_clean_metric);
                e["best_epoch"] = s.result->best_epoch;
                e["best_val_metric"] = number(s.result->best_val_metric);
                e["relabel"] = s.result->relabel ? to_json(*s.result->relabel) : json(nullptr);
            } else {
                e["error"] = s.error;
            }
            seeds.push_back(std::move(e));
        }
        cells.push_back(json{{"method", to_string(c.method)},
                             {"noise_rate", c.noise_rate},
                             {"mean_student_clean", number(c.mean_student_clean)},
                             {"mean_teacher_clean", number(c.mean_teacher_clean)},
                             {"failed_seeds", c.failed},
                             {"seeds", std::move(seeds)}});
    }

    json runs = json::array();
    for (const auto& r : report.runs) {
        json j{{"cell", cell_name(r.cell)}};
        if (r.result) {
            j["result"] = to_json(*r.result);
        } else {
            j["error"] = r.error;
        }
        runs.push_back(std::move(j));
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"generated_at", timestamp},
                {"config", std::move(config)},
                {"failed_runs", report.failed_runs},
                {"cells", std::move(cells)},
                {"runs", std::move(runs)}};
}

void write_curve_csv(std::ostream& os, const std::vector<EpochRecord>& epochs) {
    os << "epoch,train_loss,val_loss,val_metric,clean_val_metric\n";
    os << std::setprecision(17);
    for (const auto& e : epochs) {
        os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_metric << ',' << e.clean_val_metric
           << '\n';
    }
}

void write_table_csv(std::ostream& os, const GridReport& report) {
    std::vector<double> rates;
    std::vector<Method> methods;
    for (const auto& c : report.cells) {
        if (std::find(rates.begin(), rates.end(), c.noise_rate) == rates.end()) rates.push_back(c.noise_rate);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    }
    os << "model";
    for (double r : rates) os << ",noise_" << rate_label(r);
    os << '\n';
    auto row = [&](Method m, bool teacher) {
        os << to_string(m) << (teacher ? "/teacher" : "");
        for (double r : rates) {
            const CellReport* c = report.find(m, r);
            os << ',' << (c ? percent(teacher ? c->mean_teacher_clean : c->mean_student_clean) : "");
        }
        os << '\n';
    };
    for (Method m : methods) {
        if (has_teacher(m)) row(m, true);
    }
    for (Method m : methods) row(m, false);
}

void emit_report(const GridReport& report, const std::filesystem::path& out_dir, const std::string& timestamp) {
    if (report.cells.empty()) throw InvalidInput("refusing to emit an empty report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "curves", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "curves").string() + ": " + ec.message());

    {
        const auto p = out_dir / "report.json";
        auto os = open_out(p);
        os << to_json(report, timestamp).dump(2) << '\n';
        close_out(os, p);
    }
    {
        const auto p = out_dir / "table.csv";
        auto os = open_out(p);
        write_table_csv(os, report);
        close_out(os, p);
    }
    for (const auto& c : report.cells) {
        for (const auto& s : c.seeds) {
            if (!s.result) continue;
            const Cell cell{c.method, c.noise_rate, s.result->alpha, s.seed};
            const auto p = out_dir / "curves" / (cell_name(cell, false) + ".csv");
            auto os = open_out(p);
            write_curve_csv(os, s.result->epochs);
            close_out(os, p);
            if (!s.result->calibration.empty()) {
                std::filesystem::create_directories(out_dir / "calibration", ec);
                if (ec) throw IoError("cannot create " + (out_dir / "calibration").string());
                const auto cp = out_dir / "calibration" / (cell_name(cell, false) + ".csv");
                auto cs = open_out(cp);
                cs << "teacher_ce,student_ce,score,flag,oracle_flag\n" << std::setprecision(17);
                for (const auto& row : s.result->calibration) {
                    cs << row.features.teacher_ce << ',' << row.features.student_ce << ',' << row.score << ','
                       << (row.flag ? 1 : 0) << ',' << (row.oracle_flag ? 1 : 0) << '\n';
                }
                close_out(cs, cp);
            }
        }
    }
}

void print_summary(std::ostream& os, const json& report) {
    if (!report.contains("schema_version") || report["schema_version"] != kReportSchemaVersion) {
        throw SchemaError("not a report.json (schema_version " + std::to_string(kReportSchemaVersion) + " expected)");
    }
    os << "generated_at: " << report.value("generated_at", "") << '\n';
    os << "failed runs:  " << report.value("failed_runs", 0) << "\n\n";
    std::vector<double> rates;
    std::vector<std::string> methods;
    for (const auto& c : report.at("cells")) {
        const double r = c.at("noise_rate").get<double>();
        const auto m = c.at("method").get<std::string>();
        if (std::find(rates.begin(), rates.end(), r) == rates.end()) rates.push_back(r);
        if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
    auto cell_value = [&](const std::string& m, double r, const char* key) -> std::string {
        for (const auto& c : report.at("cells")) {
            if (c.at("method") == m && c.at("noise_rate").get<double>() == r && c.at(key).is_number()) {
                return percent(c.at(key).get<double>());
            }
        }
        return "-";
    };
    os << std::left << std::setw(20) << "model";
    for (double r : rates) os << std::right << std::setw(12) << ("noise " + rate_label(r) + "%");
    os << '\n';
    for (const char* key : {"mean_teacher_clean", "mean_student_clean"}) {
        const bool teacher = std::string(key) == "mean_teacher_clean";
        for (const auto& m : methods) {
            if (teacher && m != "VANILLA" && m != "CD" && m != "CD_LR") continue;
            os << std::left << std::setw(20) << (teacher ? m + "/teacher" : m);
            for (double r : rates) os << std::right << std::setw(12) << cell_value(m, r, key);
            os << '\n';
        }
    }
}

} // namespace nkd
