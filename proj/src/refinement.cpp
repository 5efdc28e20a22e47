// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/refinement.hpp"

#include "noisykd/error.hpp"
#include "noisykd/losses.hpp"
#include "noisykd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace nkd {

namespace {

constexpr std::size_t kFeatureCount = 2;

double gini(std::size_t noisy, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(noisy) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(std::span<const LossFeatures> features, const std::vector<bool>& flags, const ForestParams& params,
                Rng& rng)
        : features_(features), flags_(flags), params_(params), rng_(rng) {}

    template <typename Tree>
    void build(Tree& tree, std::vector<std::size_t>& sample) {
        tree.clear();
        grow(tree, sample, 0, sample.size(), 0);
    }

private:
    template <typename Tree>
    std::uint32_t grow(Tree& tree, std::vector<std::size_t>& sample, std::size_t lo, std::size_t hi,
                       std::size_t depth) {
        const auto id = static_cast<std::uint32_t>(tree.size());
        tree.emplace_back();
        const std::size_t total = hi - lo;
        std::size_t noisy = 0;
        for (std::size_t i = lo; i < hi; ++i) noisy += flags_[sample[i]];
        tree[id].noisy = 2 * noisy > total;

        const bool pure = noisy == 0 || noisy == total;
        if (pure || depth >= params_.max_depth || total < 2 * params_.min_samples_leaf) return id;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_impurity = gini(noisy, total) * static_cast<double>(total);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            double lo_v = features_[sample[lo]][f], hi_v = lo_v;
            for (std::size_t i = lo; i < hi; ++i) {
                lo_v = std::min(lo_v, features_[sample[i]][f]);
                hi_v = std::max(hi_v, features_[sample[i]][f]);
            }
            if (!(hi_v > lo_v)) continue;
            for (std::size_t k = 0; k < params_.threshold_candidates; ++k) {
                const double t = lo_v + (hi_v - lo_v) * uniform01(rng_);
                std::size_t left = 0, left_noisy = 0;
                for (std::size_t i = lo; i < hi; ++i) {
                    if (features_[sample[i]][f] <= t) {
                        ++left;
                        left_noisy += flags_[sample[i]];
                    }
                }
                const std::size_t right = total - left;
                if (left < params_.min_samples_leaf || right < params_.min_samples_leaf) continue;
                const double impurity = gini(left_noisy, left) * static_cast<double>(left) +
                                        gini(noisy - left_noisy, right) * static_cast<double>(right);
                if (impurity < best_impurity - 1e-12) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = t;
                }
            }
        }
        if (best_feature < 0) return id;

        const auto f = static_cast<std::size_t>(best_feature);
        const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(lo),
                                        sample.begin() + static_cast<std::ptrdiff_t>(hi),
                                        [&](std::size_t s) { return features_[s][f] <= best_threshold; });
        const auto split = static_cast<std::size_t>(mid - sample.begin());
        tree[id].feature = best_feature;
        tree[id].threshold = best_threshold;
        const auto left = grow(tree, sample, lo, split, depth + 1);
        const auto right = grow(tree, sample, split, hi, depth + 1);
        tree[id].left = left;
        tree[id].right = right;
        return id;
    }

    std::span<const LossFeatures> features_;
    const std::vector<bool>& flags_;
    const ForestParams& params_;
    Rng& rng_;
};

} // namespace

double Discriminator::score(const LossFeatures& f) const {
    if (!trained()) throw StateError("discriminator used before training");
    std::size_t votes = 0;
    for (const auto& tree : trees_) {
        std::uint32_t n = 0;
        while (tree[n].feature >= 0) {
            n = f[static_cast<std::size_t>(tree[n].feature)] <= tree[n].threshold ? tree[n].left : tree[n].right;
        }
        votes += tree[n].noisy;
    }
    return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

std::vector<LossFeatures> collect_features(const Mlp& teacher, const Mlp& student, const SampleView& ds) {
    if (teacher.input_dim() != ds.features->cols() || student.input_dim() != ds.features->cols()) {
        throw InvalidInput("model input dim does not match the dataset");
    }
    if (teacher.num_classes() != ds.num_classes || student.num_classes() != ds.num_classes) {
        throw InvalidInput("model class count does not match the dataset");
    }
    std::vector<LossFeatures> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[i].teacher_ce = cross_entropy(ds.labels[i], softmax(teacher.forward(ds.x(i))));
        out[i].student_ce = cross_entropy(ds.labels[i], softmax(student.forward(ds.x(i))));
    }
    return out;
}

Discriminator train_discriminator(std::span<const LossFeatures> features, const std::vector<bool>& flags,
                                  const ForestParams& params) {
    if (features.size() != flags.size()) throw InvalidInput("features and flags differ in length");
    if (params.trees == 0) throw InvalidConfig("a forest needs at least one tree");
    if (params.threshold_candidates == 0) throw InvalidConfig("threshold_candidates must be positive");
    if (params.min_samples_leaf == 0) throw InvalidConfig("min_samples_leaf must be positive");
    const auto noisy = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    const std::size_t clean = flags.size() - noisy;
    const std::size_t need = std::max<std::size_t>(1, params.min_per_class);
    if (noisy < need || clean < need) {
        throw DegenerateLabels("discriminator needs at least " + std::to_string(need) +
                               " samples of each flag value (noisy=" + std::to_string(noisy) +
                               ", clean=" + std::to_string(clean) + ")");
    }
    for (const auto& f : features) {
        if (!std::isfinite(f.teacher_ce) || !std::isfinite(f.student_ce)) {
            throw InvalidInput("non-finite loss feature");
        }
    }

    Discriminator d;
    Rng rng(params.seed);
    TreeBuilder builder(features, flags, params, rng);
    const std::size_t n = features.size();
    std::vector<std::size_t> sample(n);
    d.trees_.resize(params.trees);
    for (auto& tree : d.trees_) {
        for (auto& s : sample) s = uniform_index(rng, n);
        builder.build(tree, sample);
    }
    return d;
}

std::vector<bool> flag_noisy(const Discriminator& d, std::span<const LossFeatures> features, double threshold) {
    if (!d.trained()) throw StateError("discriminator used before training");
    std::vector<bool> flags(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) flags[i] = d.score(features[i]) >= threshold;
    return flags;
}

std::vector<Label> relabel_labels(const SampleView& ds, const std::vector<bool>& flags, const Mlp& teacher) {
    if (flags.size() != ds.size()) throw InvalidInput("flag count does not match the dataset");
    if (teacher.input_dim() != ds.features->cols()) throw InvalidInput("teacher input dim does not match the dataset");
    std::vector<Label> out(ds.labels.begin(), ds.labels.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (flags[i]) out[i] = teacher.predict(ds.x(i));
    }
    return out;
}

LabeledDataset relabel(const LabeledDataset& ds, const std::vector<bool>& flags, const Mlp& teacher) {
    return ds.with_observed_labels(relabel_labels(ds.view(), flags, teacher));
}

void write_calibration_csv(std::ostream& os, std::span<const LossFeatures> features, const Discriminator& d,
                           double threshold, const std::vector<bool>& oracle_flags) {
    if (oracle_flags.size() != features.size()) throw InvalidInput("oracle flags differ in length from features");
    os << "teacher_ce,student_ce,score,flag,oracle_flag\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double s = d.score(features[i]);
        os << features[i].teacher_ce << ',' << features[i].student_ce << ',' << s << ',' << (s >= threshold ? 1 : 0)
           << ',' << (oracle_flags[i] ? 1 : 0) << '\n';
    }
}

} // namespace nkd
