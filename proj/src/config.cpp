// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/config.hpp"

#include "noisykd/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nkd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto t = trim(v);
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(out)) {
        throw InvalidConfig(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto t = trim(v);
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw InvalidConfig(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InvalidConfig(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += f(xs[i]);
    }
    return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, F&& f) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(f(item));
    return out;
}

#define NKD_REAL(field) [](ExperimentGrid& g, const std::string& v) { g.field = to_real(#field, v); }, \
                        [](const ExperimentGrid& g) { return fmt(g.field); }
#define NKD_UINT(field) [](ExperimentGrid& g, const std::string& v) { g.field = to_uint(#field, v); }, \
                        [](const ExperimentGrid& g) { return std::to_string(g.field); }

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> k;
    k.push_back({"data.path", "dataset file to load instead of generating synthetic data (empty = synthetic)",
                 [](ExperimentGrid& g, const std::string& v) {
                     if (trim(v).empty()) {
                         g.data.path.reset();
                     } else {
                         g.data.path = trim(v);
                         g.data.format = file_format_from_path(*g.data.path);
                     }
                 },
                 [](const ExperimentGrid& g) { return g.data.path ? g.data.path->string() : std::string(); }});
    k.push_back({"data.format", "format of data.path: csv | jsonl | dump",
                 [](ExperimentGrid& g, const std::string& v) { g.data.format = file_format_from_string(trim(v)); },
                 [](const ExperimentGrid& g) { return to_string(g.data.format); }});
    k.push_back({"data.kind", "synthetic generator: blobs | moons | bow",
                 [](ExperimentGrid& g, const std::string& v) {
                     g.data.synthetic.kind = synthetic_kind_from_string(trim(v));
                 },
                 [](const ExperimentGrid& g) { return to_string(g.data.synthetic.kind); }});
    k.push_back({"data.n", "synthetic sample count", NKD_UINT(data.synthetic.n)});
    k.push_back({"data.dim", "synthetic feature dimension", NKD_UINT(data.synthetic.dim)});
    k.push_back({"data.classes", "synthetic class count", NKD_UINT(data.synthetic.classes)});
    k.push_back({"data.separation", "synthetic class separation (0 = indistinguishable)",
                 NKD_REAL(data.synthetic.separation)});
    k.push_back({"data.metric", "task metric: accuracy | mcc",
                 [](ExperimentGrid& g, const std::string& v) { g.data.metric = task_metric_from_string(trim(v)); },
                 [](const ExperimentGrid& g) { return to_string(g.data.metric.value_or(TaskMetric::Accuracy)); }});
    k.push_back({"noise_rates", "label noise rates in [0, 0.5], applied to train and validation alike",
                 [](ExperimentGrid& g, const std::string& v) {
                     g.noise_rates = parse_list<double>(v, [](const std::string& s) { return to_real("noise_rates", s); });
                 },
                 [](const ExperimentGrid& g) { return join(g.noise_rates, fmt); }});
    k.push_back({"methods", "methods to run: NO_KD, VANILLA, SELF_DSTL, CD, CD_LR",
                 [](ExperimentGrid& g, const std::string& v) {
                     g.methods = parse_list<Method>(v, [](const std::string& s) { return method_from_string(s); });
                 },
                 [](const ExperimentGrid& g) {
                     return join(g.methods, [](Method m) { return to_string(m); });
                 }});
    k.push_back({"alphas", "alpha grid swept for VANILLA, CD and CD_LR",
                 [](ExperimentGrid& g, const std::string& v) {
                     g.alphas = parse_list<double>(v, [](const std::string& s) { return to_real("alphas", s); });
                 },
                 [](const ExperimentGrid& g) { return join(g.alphas, fmt); }});
    k.push_back({"seeds", "master seeds; each derives independent data/split/noise/init/shuffle streams",
                 [](ExperimentGrid& g, const std::string& v) {
                     g.seeds = parse_list<std::uint64_t>(v, [](const std::string& s) { return to_uint("seeds", s); });
                 },
                 [](const ExperimentGrid& g) {
                     return join(g.seeds, [](std::uint64_t s) { return std::to_string(s); });
                 }});
    k.push_back({"alpha", "alpha for methods outside the sweep (SELF_DSTL)", NKD_REAL(base.alpha)});
    k.push_back({"epochs", "training epochs per run", NKD_UINT(base.epochs)});
    k.push_back({"refine_epoch", "co-distill epochs before label refinement; self-distill warm-up length",
                 NKD_UINT(base.refine_epoch)});
    k.push_back({"learning_rate", "SGD learning rate", NKD_REAL(base.learning_rate)});
    k.push_back({"batch_size", "mini-batch size", NKD_UINT(base.batch_size)});
    k.push_back({"patience", "early-stopping patience in epochs on the noisy validation metric (0 = off)",
                 NKD_UINT(base.early_stopping_patience)});
    k.push_back({"hidden_width", "teacher hidden width; the student uses half", NKD_UINT(base.hidden_width)});
    k.push_back({"activation", "hidden activation: tanh | relu",
                 [](ExperimentGrid& g, const std::string& v) { g.base.activation = activation_from_string(trim(v)); },
                 [](const ExperimentGrid& g) { return to_string(g.base.activation); }});
    k.push_back({"temperature", "softening temperature inside the KD term", NKD_REAL(base.temperature)});
    k.push_back({"split.val_fraction", "fraction held out as the noisy validation set", NKD_REAL(val_fraction)});
    k.push_back({"split.test_fraction", "fraction held out as the clean test slice", NKD_REAL(test_fraction)});
    k.push_back({"forest.trees", "discriminator tree count", NKD_UINT(base.forest.trees)});
    k.push_back({"forest.max_depth", "discriminator tree depth", NKD_UINT(base.forest.max_depth)});
    k.push_back({"forest.threshold_candidates", "random split thresholds tried per feature and node",
                 NKD_UINT(base.forest.threshold_candidates)});
    k.push_back({"forest.min_per_class", "minimum validation samples per flag value to train the discriminator",
                 NKD_UINT(base.forest.min_per_class)});
    k.push_back({"flag_threshold", "discriminator score at or above which a sample is flagged noisy",
                 NKD_REAL(base.flag_threshold)});
    k.push_back({"emit.calibration", "write per-sample discriminator scores for CD_LR runs",
                 [](ExperimentGrid& g, const std::string& v) { g.emit_calibration = to_bool("emit.calibration", v); },
                 [](const ExperimentGrid& g) { return std::string(g.emit_calibration ? "true" : "false"); }});
    return k;
}

#undef NKD_REAL
#undef NKD_UINT

} // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void apply_setting(ExperimentGrid& grid, const std::string& key, const std::string& value) {
    const auto& keys = config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
    if (it == keys.end()) throw InvalidConfig("unknown config key '" + key + "'");
    it->set(grid, value);
}

ExperimentGrid parse_config(std::istream& is) {
    ExperimentGrid grid;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
        try {
            apply_setting(grid, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const InvalidConfig& e) {
            throw InvalidConfig("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return grid;
}

ExperimentGrid load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    return parse_config(is);
}

std::vector<std::pair<std::string, std::string>> describe(const ExperimentGrid& grid) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : config_keys()) out.emplace_back(k.name, k.get(grid));
    return out;
}

void validate(const ExperimentGrid& grid) {
    if (grid.noise_rates.empty() || grid.methods.empty() || grid.seeds.empty()) {
        throw InvalidConfig("noise_rates, methods and seeds must be non-empty");
    }
    const bool sweeps = std::any_of(grid.methods.begin(), grid.methods.end(), [](Method m) {
        return m == Method::Vanilla || m == Method::CoDistill || m == Method::CoDistillRefine;
    });
    if (sweeps && grid.alphas.empty()) throw InvalidConfig("alphas must be non-empty");
    for (double r : grid.noise_rates) {
        if (!(r >= 0.0 && r <= 0.5)) throw InvalidConfig("noise rate " + fmt(r) + " outside [0, 0.5]");
    }
    for (double a : grid.alphas) {
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidConfig("alpha " + fmt(a) + " outside [0, 1]");
    }
    if (!(grid.val_fraction > 0.0) || !(grid.test_fraction >= 0.0) || grid.val_fraction + grid.test_fraction >= 1.0) {
        throw InvalidConfig("split fractions must be positive and sum below 1");
    }
    TrainConfig probe = grid.base;
    probe.alpha = grid.alphas.empty() ? probe.alpha : grid.alphas.front();
    validate(probe);
    validate(grid.base);
}

} // namespace nkd
