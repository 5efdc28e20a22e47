// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/metrics.hpp"

#include "noisykd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nkd {

namespace {

void check_pair(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) {
        throw InvalidInput("label vectors differ in length: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
    }
    if (a.empty()) throw InvalidInput("empty label vectors");
}

} // namespace

ConfusionMatrix::ConfusionMatrix(std::span<const Label> pred, std::span<const Label> gold, std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
    check_pair(pred, gold);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= classes_ || gold[i] >= classes_) throw InvalidInput("label out of range in confusion matrix");
        ++counts_[gold[i] * classes_ + pred[i]];
        ++total_;
    }
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t k = 0; k < classes_; ++k) t += at(k, k);
    return t;
}

double accuracy(std::span<const Label> pred, std::span<const Label> gold) {
    check_pair(pred, gold);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double matthews_corr(std::span<const Label> pred, std::span<const Label> gold) {
    check_pair(pred, gold);
    const Label top = std::max(*std::max_element(pred.begin(), pred.end()),
                               *std::max_element(gold.begin(), gold.end()));
    const ConfusionMatrix cm(pred, gold, top + 1);
    const std::size_t k = cm.classes();
    // (c*s - sum_k p_k t_k) / sqrt((s^2 - sum_k p_k^2)(s^2 - sum_k t_k^2))
    const double s = static_cast<double>(cm.total());
    const double c = static_cast<double>(cm.trace());
    double pt = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        double p = 0.0, t = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
            p += static_cast<double>(cm.at(b, a));
            t += static_cast<double>(cm.at(a, b));
        }
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double denom = std::sqrt((s * s - pp) * (s * s - tt));
    if (denom == 0.0) return 0.0;
    return (c * s - pt) / denom;
}

double label_agreement(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) throw InvalidInput("label vectors differ in length");
    if (a.empty()) return 1.0;
    return accuracy(a, b);
}

double task_score(TaskMetric metric, std::span<const Label> pred, std::span<const Label> gold) {
    return metric == TaskMetric::Mcc ? matthews_corr(pred, gold) : accuracy(pred, gold);
}

} // namespace nkd
