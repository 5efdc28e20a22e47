// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nkd {

/// C x C counts; rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix(std::span<const Label> pred, std::span<const Label> gold, std::size_t num_classes);

    std::size_t classes() const noexcept { return classes_; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const noexcept { return counts_[truth * classes_ + pred]; }
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t trace() const noexcept;

private:
    std::size_t classes_;
    std::uint64_t total_ = 0;
    std::vector<std::uint64_t> counts_;
};

double accuracy(std::span<const Label> pred, std::span<const Label> gold);

/// Matthews correlation; the multiclass form reduces to the usual binary
/// formula for two classes. A zero denominator yields 0.
double matthews_corr(std::span<const Label> pred, std::span<const Label> gold);

/// Fraction of positions where the two label vectors agree.
double label_agreement(std::span<const Label> a, std::span<const Label> b);

/// accuracy or matthews_corr, depending on the task.
double task_score(TaskMetric metric, std::span<const Label> pred, std::span<const Label> gold);

} // namespace nkd
