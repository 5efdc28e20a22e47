// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/dataset.hpp"
#include "noisykd/mlp.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace nkd {

/// Per-sample cross-entropy of each model against the observed label.
struct LossFeatures {
    double teacher_ce = 0.0;
    double student_ce = 0.0;

    double operator[](std::size_t k) const noexcept { return k == 0 ? teacher_ce : student_ce; }
    friend bool operator==(const LossFeatures&, const LossFeatures&) = default;
};

struct ForestParams {
    std::size_t trees = 100;
    std::size_t max_depth = 8;
    std::size_t min_samples_leaf = 1;
    /// Random split thresholds drawn per feature at every node.
    std::size_t threshold_candidates = 16;
    /// Fewer samples than this in either flag class is treated as degenerate.
    std::size_t min_per_class = 10;
    std::uint64_t seed = 1;
};

/// Bagged decision trees over the two loss features. The score of a sample
/// is the fraction of trees voting "noisy".
class Discriminator {
public:
    Discriminator() = default;

    bool trained() const noexcept { return !trees_.empty(); }
    std::size_t tree_count() const noexcept { return trees_.size(); }

    /// Throws StateError when untrained.
    double score(const LossFeatures& f) const;

private:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        bool noisy = false;
    };
    using Tree = std::vector<Node>;

    std::vector<Tree> trees_;

    friend Discriminator train_discriminator(std::span<const LossFeatures>, const std::vector<bool>&,
                                             const ForestParams&);
};

/// Loss features of every sample of `ds`, in dataset order.
std::vector<LossFeatures> collect_features(const Mlp& teacher, const Mlp& student, const SampleView& ds);

/// Fits the forest on (features, flags). Throws DegenerateLabels if either
/// flag value occurs fewer than params.min_per_class times.
Discriminator train_discriminator(std::span<const LossFeatures> features, const std::vector<bool>& flags,
                                  const ForestParams& params);

/// flag[i] = score(features[i]) >= threshold.
std::vector<bool> flag_noisy(const Discriminator& d, std::span<const LossFeatures> features,
                             double threshold = 0.5);

/// Observed labels with every flagged sample replaced by the teacher's argmax.
std::vector<Label> relabel_labels(const SampleView& ds, const std::vector<bool>& flags, const Mlp& teacher);

/// Dataset form of relabel_labels; features and true labels are carried over.
LabeledDataset relabel(const LabeledDataset& ds, const std::vector<bool>& flags, const Mlp& teacher);

/// CSV `teacher_ce,student_ce,score,flag,oracle_flag` for offline calibration checks.
void write_calibration_csv(std::ostream& os, std::span<const LossFeatures> features, const Discriminator& d,
                           double threshold, const std::vector<bool>& oracle_flags);

} // namespace nkd
