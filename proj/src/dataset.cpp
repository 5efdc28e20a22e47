// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/dataset.hpp"

#include "noisykd/error.hpp"
#include "noisykd/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nkd {

using nlohmann::json;

namespace {

std::vector<bool> derive_flags(const std::vector<Label>& observed, const std::vector<Label>& truth) {
    std::vector<bool> flags(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) flags[i] = observed[i] != truth[i];
    return flags;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(line, "bad feature value '" + s + "'");
    }
    return v;
}

Label parse_label(const std::string& s, std::size_t line) {
    if (s.empty()) throw ParseError(line, "missing label");
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0) {
        throw ParseError(line, "bad label '" + s + "'");
    }
    return static_cast<Label>(v);
}

std::size_t classes_for(const std::vector<Label>& labels) {
    const Label top = *std::max_element(labels.begin(), labels.end());
    return std::max<std::size_t>(2, top + 1);
}

LabeledDataset load_csv(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    bool have_header = false;
    std::vector<double> values;
    std::vector<Label> labels;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (!have_header) {
            if (cells.size() < 2 || cells.back() != "label") {
                throw ParseError(lineno, "header must be f0,...,f{d-1},label");
            }
            dim = cells.size() - 1;
            have_header = true;
            continue;
        }
        if (cells.size() != dim + 1) {
            if (cells.size() == dim) throw ParseError(lineno, "row " + std::to_string(labels.size() + 1) + " is missing its label");
            throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                              " features, found " + std::to_string(cells.size() - 1));
        }
        for (std::size_t j = 0; j < dim; ++j) values.push_back(parse_double(cells[j], lineno));
        labels.push_back(parse_label(cells[dim], lineno));
    }
    if (labels.empty()) throw InvalidInput("dataset file contains no rows");
    const auto n = labels.size();
    const auto classes = classes_for(labels);
    return LabeledDataset(FeatureMatrix(n, dim, std::move(values)), std::move(labels), classes);
}

LabeledDataset load_jsonl(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    std::vector<double> values;
    std::vector<Label> labels;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!row.is_object() || !row.contains("features") || !row["features"].is_array()) {
            throw ParseError(lineno, "missing 'features' array");
        }
        if (!row.contains("label") || !row["label"].is_number_integer() || row["label"].get<long long>() < 0) {
            throw ParseError(lineno, "missing or invalid integer 'label'");
        }
        const auto& f = row["features"];
        if (labels.empty()) {
            dim = f.size();
            if (dim == 0) throw SchemaError("line " + std::to_string(lineno) + ": empty feature vector");
        } else if (f.size() != dim) {
            throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                              " features, found " + std::to_string(f.size()));
        }
        for (const auto& v : f) {
            if (!v.is_number()) throw ParseError(lineno, "non-numeric feature");
            values.push_back(v.get<double>());
        }
        labels.push_back(row["label"].get<Label>());
    }
    if (labels.empty()) throw InvalidInput("dataset file contains no rows");
    const auto n = labels.size();
    const auto classes = classes_for(labels);
    return LabeledDataset(FeatureMatrix(n, dim, std::move(values)), std::move(labels), classes);
}

LabeledDataset load_dump(std::istream& is) {
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("invalid JSON dump: ") + e.what());
    }
    try {
        if (doc.at("schema_version").get<int>() != 1) throw SchemaError("unsupported dataset dump version");
        const auto rows = doc.at("features").get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw InvalidInput("dataset dump contains no rows");
        const std::size_t dim = rows.front().size();
        std::vector<double> values;
        for (const auto& r : rows) {
            if (r.size() != dim) throw SchemaError("inconsistent feature dimension in dump");
            values.insert(values.end(), r.begin(), r.end());
        }
        auto observed = doc.at("labels").get<std::vector<Label>>();
        auto truth = doc.at("oracle").at("true_labels").get<std::vector<Label>>();
        const auto flags = doc.at("oracle").at("noise_flags").get<std::vector<bool>>();
        LabeledDataset ds(FeatureMatrix(rows.size(), dim, std::move(values)), std::move(observed), std::move(truth),
                          doc.at("num_classes").get<std::size_t>(),
                          task_metric_from_string(doc.at("task_metric").get<std::string>()));
        if (flags != ds.noise_flags()) throw SchemaError("oracle noise_flags disagree with labels");
        return ds;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed dataset dump: ") + e.what());
    }
}

} // namespace

std::string to_string(TaskMetric m) { return m == TaskMetric::Accuracy ? "accuracy" : "mcc"; }

TaskMetric task_metric_from_string(const std::string& s) {
    if (s == "accuracy") return TaskMetric::Accuracy;
    if (s == "mcc") return TaskMetric::Mcc;
    throw InvalidConfig("unknown task metric '" + s + "'");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw InvalidInput("feature matrix size does not match its shape");
}

LabeledDataset::LabeledDataset(FeatureMatrix features, std::vector<Label> labels, std::size_t num_classes,
                               TaskMetric metric)
    : LabeledDataset(std::move(features), labels, labels, num_classes, metric) {}

LabeledDataset::LabeledDataset(FeatureMatrix features, std::vector<Label> observed, std::vector<Label> truth,
                               std::size_t num_classes, TaskMetric metric)
    : features_(std::move(features)), observed_(std::move(observed)), true_(std::move(truth)),
      num_classes_(num_classes), metric_(metric) {
    if (observed_.empty()) throw InvalidInput("a dataset needs at least one sample");
    if (num_classes_ < 2) throw InvalidInput("a dataset needs at least two classes");
    if (features_.rows() != observed_.size() || true_.size() != observed_.size()) {
        throw InvalidInput("features and labels disagree on the sample count");
    }
    for (std::size_t i = 0; i < observed_.size(); ++i) {
        if (observed_[i] >= num_classes_ || true_[i] >= num_classes_) {
            throw InvalidInput("label out of range at sample " + std::to_string(i));
        }
    }
    flags_ = derive_flags(observed_, true_);
}

std::size_t LabeledDataset::noisy_count() const noexcept {
    return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), true));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> values;
    values.reserve(indices.size() * dim());
    std::vector<Label> obs, tru;
    for (std::size_t i : indices) {
        if (i >= size()) throw InvalidInput("subset index out of range");
        const auto r = features_.row(i);
        values.insert(values.end(), r.begin(), r.end());
        obs.push_back(observed_[i]);
        tru.push_back(true_[i]);
    }
    return LabeledDataset(FeatureMatrix(indices.size(), dim(), std::move(values)), std::move(obs), std::move(tru),
                          num_classes_, metric_);
}

LabeledDataset LabeledDataset::with_observed_labels(std::vector<Label> observed) const {
    if (observed.size() != size()) throw InvalidInput("relabeled vector has the wrong length");
    return LabeledDataset(features_, std::move(observed), true_, num_classes_, metric_);
}

LabeledDataset LabeledDataset::with_metric(TaskMetric metric) const {
    LabeledDataset out = *this;
    out.metric_ = metric;
    return out;
}

std::string to_string(SyntheticKind k) {
    switch (k) {
    case SyntheticKind::Blobs: return "blobs";
    case SyntheticKind::TwoMoons: return "moons";
    case SyntheticKind::BagOfWords: return "bow";
    }
    return "blobs";
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "blobs") return SyntheticKind::Blobs;
    if (s == "moons" || s == "two-moons") return SyntheticKind::TwoMoons;
    if (s == "bow" || s == "bag-of-words") return SyntheticKind::BagOfWords;
    throw InvalidConfig("unknown synthetic kind '" + s + "'");
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw InvalidConfig("need at least two classes");
    if (spec.dim < 2) throw InvalidConfig("need at least two feature dimensions");
    if (spec.n < 10 * spec.classes) throw InvalidConfig("need at least 10 samples per class");
    if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
        throw InvalidConfig("class separation must be finite and >= 0");
    }
    if (spec.kind == SyntheticKind::Blobs && spec.classes > 2 * spec.dim) {
        throw InvalidConfig("blobs support at most 2 * dim classes");
    }
    if (spec.kind == SyntheticKind::BagOfWords && spec.dim < spec.classes) {
        throw InvalidConfig("bag-of-words needs a vocabulary of at least one word per class");
    }

    Rng rng(spec.seed);
    const std::size_t n = spec.n, d = spec.dim, c = spec.classes;
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % c;
    shuffle(labels.begin(), labels.end(), rng);

    std::vector<double> values(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* x = values.data() + i * d;
        const Label y = labels[i];
        switch (spec.kind) {
        case SyntheticKind::Blobs: {
            // Class centre: +-separation along axis (y mod d).
            for (std::size_t j = 0; j < d; ++j) x[j] = standard_normal(rng);
            const double sign = (y / d) % 2 == 0 ? 1.0 : -1.0;
            x[y % d] += sign * spec.separation;
            break;
        }
        case SyntheticKind::TwoMoons: {
            // Interleaved half circles; class pairs are tiled along the first axis.
            const double theta = 3.141592653589793 * uniform01(rng);
            const double offset = 2.5 * static_cast<double>(y / 2);
            const double bx = (y % 2 == 0 ? std::cos(theta) : 1.0 - std::cos(theta)) + offset;
            const double by = y % 2 == 0 ? std::sin(theta) : 0.5 - std::sin(theta);
            x[0] = spec.separation * bx + 0.25 * standard_normal(rng);
            x[1] = spec.separation * by + 0.25 * standard_normal(rng);
            for (std::size_t j = 2; j < d; ++j) x[j] = 0.25 * standard_normal(rng);
            break;
        }
        case SyntheticKind::BagOfWords: {
            // Term frequencies of a short document drawn from background + class topic.
            constexpr std::size_t kDocLength = 30;
            const double topic_weight = spec.separation / (1.0 + spec.separation);
            const std::size_t block = d / c;
            for (std::size_t w = 0; w < kDocLength; ++w) {
                std::size_t word;
                if (uniform01(rng) < topic_weight) {
                    word = y * block + uniform_index(rng, block);
                } else {
                    word = uniform_index(rng, d);
                }
                x[word] += 1.0 / static_cast<double>(kDocLength);
            }
            break;
        }
        }
    }
    return LabeledDataset(FeatureMatrix(n, d, std::move(values)), std::move(labels), c);
}

std::string to_string(FileFormat f) {
    switch (f) {
    case FileFormat::Csv: return "csv";
    case FileFormat::Jsonl: return "jsonl";
    case FileFormat::Dump: return "dump";
    }
    return "csv";
}

FileFormat file_format_from_string(const std::string& s) {
    if (s == "csv") return FileFormat::Csv;
    if (s == "jsonl") return FileFormat::Jsonl;
    if (s == "dump" || s == "json") return FileFormat::Dump;
    throw InvalidConfig("unknown dataset format '" + s + "'");
}

FileFormat file_format_from_path(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".jsonl") return FileFormat::Jsonl;
    if (ext == ".json") return FileFormat::Dump;
    return FileFormat::Csv;
}

LabeledDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open dataset " + path.string());
    switch (format) {
    case FileFormat::Csv: return load_csv(is);
    case FileFormat::Jsonl: return load_jsonl(is);
    case FileFormat::Dump: return load_dump(is);
    }
    throw InvalidConfig("unknown dataset format");
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, FileFormat format) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    const auto& f = ds.features();
    if (format == FileFormat::Csv) {
        for (std::size_t j = 0; j < ds.dim(); ++j) os << 'f' << j << ',';
        os << "label\n";
        char buf[64];
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (double v : f.row(i)) {
                auto res = std::to_chars(buf, buf + sizeof buf, v);
                os.write(buf, res.ptr - buf);
                os << ',';
            }
            os << ds.observed_labels()[i] << '\n';
        }
    } else if (format == FileFormat::Jsonl) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto r = f.row(i);
            json row{{"features", std::vector<double>(r.begin(), r.end())}, {"label", ds.observed_labels()[i]}};
            os << row.dump() << '\n';
        }
    } else {
        json rows = json::array();
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto r = f.row(i);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        json doc{{"schema_version", 1},
                 {"num_classes", ds.num_classes()},
                 {"task_metric", to_string(ds.metric())},
                 {"features", std::move(rows)},
                 {"labels", ds.observed_labels()},
                 {"oracle", {{"true_labels", ds.true_labels()}, {"noise_flags", ds.noise_flags()}}}};
        os << doc.dump(1) << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, const SplitSpec& spec) {
    if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
        throw InvalidConfig("val_fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    if (n < 10) throw InvalidInput("need at least 10 samples to split, got " + std::to_string(n));
    const auto n_val = static_cast<std::size_t>(std::lround(spec.val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) throw InvalidInput("split leaves an empty side");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(spec.seed);
    shuffle(idx.begin(), idx.end(), rng);
    const std::span<const std::size_t> all(idx);
    return {ds.subset(all.subspan(n_val)), ds.subset(all.first(n_val))};
}

LabeledDataset inject_noise(const LabeledDataset& ds, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 0.5)) {
        throw InvalidConfig("noise rate must lie in [0, 0.5], got " + std::to_string(rate));
    }
    const std::size_t n = ds.size();
    // The epsilon keeps products like 0.29 * 100 from rounding down a whole sample.
    const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + uniform_index(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    auto observed = ds.observed_labels();
    const auto& truth = ds.true_labels();
    const std::size_t c = ds.num_classes();
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = idx[k];
        Label other = uniform_index(rng, c - 1);
        if (other >= truth[i]) ++other;
        observed[i] = other;
    }
    return ds.with_observed_labels(std::move(observed));
}

} // namespace nkd
