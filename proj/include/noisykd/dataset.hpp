// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nkd {

using Label = std::size_t;

enum class TaskMetric { Accuracy, Mcc };

std::string to_string(TaskMetric m);
TaskMetric task_metric_from_string(const std::string& s);

/// Dense row-major N x d matrix.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * cols_, cols_};
    }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// What a trainer is allowed to see: features and observed labels. It carries
/// no true labels or noise flags.
struct SampleView {
    const FeatureMatrix* features = nullptr;
    std::span<const Label> labels;
    std::size_t num_classes = 0;
    TaskMetric metric = TaskMetric::Accuracy;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const double> x(std::size_t i) const noexcept { return features->row(i); }
};

/// Immutable labeled dataset with oracle fields (true labels, noise flags) kept
/// alongside the observed labels for evaluation.
class LabeledDataset {
public:
    LabeledDataset() = default;

    /// Clean dataset: true labels equal observed labels, no noise flags.
    LabeledDataset(FeatureMatrix features, std::vector<Label> labels, std::size_t num_classes,
                   TaskMetric metric = TaskMetric::Accuracy);

    /// Full constructor; noise flags are derived as observed != true.
    LabeledDataset(FeatureMatrix features, std::vector<Label> observed, std::vector<Label> truth,
                   std::size_t num_classes, TaskMetric metric);

    std::size_t size() const noexcept { return observed_.size(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    TaskMetric metric() const noexcept { return metric_; }

    const FeatureMatrix& features() const noexcept { return features_; }
    const std::vector<Label>& observed_labels() const noexcept { return observed_; }

    // Oracle fields. Only evaluation, reporting and the sanctioned use of
    // validation flags as discriminator targets may read these.
    const std::vector<Label>& true_labels() const noexcept { return true_; }
    const std::vector<bool>& noise_flags() const noexcept { return flags_; }
    std::size_t noisy_count() const noexcept;

    SampleView view() const noexcept { return {&features_, observed_, num_classes_, metric_}; }
    /// Same features scored against the true labels; for clean evaluation only.
    SampleView oracle_view() const noexcept { return {&features_, true_, num_classes_, metric_}; }

    LabeledDataset subset(std::span<const std::size_t> indices) const;
    LabeledDataset with_observed_labels(std::vector<Label> observed) const;
    LabeledDataset with_metric(TaskMetric metric) const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

private:
    FeatureMatrix features_;
    std::vector<Label> observed_;
    std::vector<Label> true_;
    std::vector<bool> flags_;
    std::size_t num_classes_ = 0;
    TaskMetric metric_ = TaskMetric::Accuracy;
};

enum class SyntheticKind { Blobs, TwoMoons, BagOfWords };

std::string to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& s);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Blobs;
    std::size_t n = 1000;
    std::size_t dim = 8;
    std::size_t classes = 2;
    double separation = 3.0;
    std::uint64_t seed = 1;
};

/// Balanced synthetic classification data (class sizes differ by at most one).
/// Requires n >= 10 * classes, dim >= 2, classes >= 2, separation >= 0.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

enum class FileFormat { Csv, Jsonl, Dump };

std::string to_string(FileFormat f);
FileFormat file_format_from_string(const std::string& s);
/// Guess from the extension: .csv, .jsonl, .json (dump).
FileFormat file_format_from_path(const std::filesystem::path& p);

/// Reads CSV (`f0,...,f{d-1},label` header) or JSONL (`features`, `label`).
/// The result is clean; C is one more than the largest label (at least 2).
LabeledDataset load_dataset(const std::filesystem::path& path, FileFormat format);

/// Writes CSV / JSONL with observed labels, or a JSON dump that keeps the
/// oracle fields under a separate `oracle` object.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, FileFormat format);

struct SplitSpec {
    double val_fraction = 0.10;
    std::uint64_t seed = 1;
};

/// Seeded shuffle, then the first round(val_fraction * N) indices form the
/// validation set. Requires N >= 10.
std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds, const SplitSpec& spec);

/// Exactly floor(rate * N) uniformly chosen samples get a label drawn
/// uniformly from the C - 1 classes other than their true label.
LabeledDataset inject_noise(const LabeledDataset& ds, double rate, std::uint64_t seed);

} // namespace nkd
