// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/error.hpp"
#include "noisykd/losses.hpp"
#include "noisykd/refinement.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace nkd;

namespace {

// Rank-based AUC: probability that a random positive outscores a random negative.
double auc(const std::vector<double>& score, const std::vector<bool>& pos) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < score.size(); ++i) {
        if (!pos[i]) continue;
        for (std::size_t j = 0; j < score.size(); ++j) {
            if (pos[j]) continue;
            pairs += 1;
            wins += score[i] > score[j] ? 1.0 : score[i] == score[j] ? 0.5 : 0.0;
        }
    }
    return wins / pairs;
}

} // namespace

TEST_CASE("discriminator separates high-loss from low-loss samples") {
    Rng rng(1);
    std::vector<LossFeatures> feats;
    std::vector<bool> flags;
    for (int i = 0; i < 200; ++i) {
        const bool noisy = i % 4 == 0;
        const double base = noisy ? 2.0 : 0.1;
        feats.push_back({base + 0.3 * uniform01(rng), base + 0.3 * uniform01(rng)});
        flags.push_back(noisy);
    }
    const auto d = train_discriminator(feats, flags, {});
    CHECK(d.trained());
    CHECK(d.tree_count() == 100);
    CHECK(flag_noisy(d, feats) == flags);
    CHECK(d.score({3.0, 3.0}) > 0.9);
    CHECK(d.score({0.0, 0.0}) < 0.1);

    std::vector<double> s;
    for (const auto& f : feats) s.push_back(d.score(f));
    CHECK(auc(s, flags) == doctest::Approx(1.0));

    // Same seed, same forest.
    const auto d2 = train_discriminator(feats, flags, {});
    for (const auto& f : feats) CHECK(d2.score(f) == d.score(f));
}

TEST_CASE("discriminator on uninformative features is near chance") {
    Rng rng(2);
    std::vector<LossFeatures> fit, held;
    std::vector<bool> fit_flags, held_flags;
    for (int i = 0; i < 1000; ++i) {
        (i < 500 ? fit : held).push_back({uniform01(rng), uniform01(rng)});
        (i < 500 ? fit_flags : held_flags).push_back(uniform01(rng) < 0.3);
    }
    const auto d = train_discriminator(fit, fit_flags, {});
    std::vector<double> s;
    for (const auto& f : held) s.push_back(d.score(f));
    CHECK(std::abs(auc(s, held_flags) - 0.5) < 0.08);
}

TEST_CASE("discriminator rejects degenerate or malformed input") {
    std::vector<LossFeatures> feats(30, {1.0, 1.0});
    std::vector<bool> none(30, false);
    CHECK_THROWS_AS(train_discriminator(feats, none, {}), DegenerateLabels);
    std::vector<bool> few(30, false);
    for (int i = 0; i < 9; ++i) few[i] = true;
    CHECK_THROWS_AS(train_discriminator(feats, few, {}), DegenerateLabels);
    few[9] = true;
    CHECK_NOTHROW(train_discriminator(feats, few, {}));

    CHECK_THROWS_AS(train_discriminator(feats, std::vector<bool>(29, false), {}), InvalidInput);
    ForestParams zero;
    zero.trees = 0;
    CHECK_THROWS_AS(train_discriminator(feats, few, zero), InvalidConfig);
    feats[0].teacher_ce = NAN;
    CHECK_THROWS_AS(train_discriminator(feats, few, {}), InvalidInput);

    const Discriminator untrained;
    CHECK_THROWS_AS(untrained.score({0.0, 0.0}), StateError);
    CHECK_THROWS_AS(flag_noisy(untrained, feats), StateError);
}

TEST_CASE("collect_features computes per-sample cross entropies") {
    const auto ds = generate_synthetic({SyntheticKind::Blobs, 40, 3, 2, 2.0, 5});
    const auto t = init_model({3, 8, 2}, 1), s = init_model({3, 4, 2}, 2);
    const auto feats = collect_features(t, s, ds.view());
    REQUIRE(feats.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(feats[i].teacher_ce == cross_entropy(ds.observed_labels()[i], softmax(t.forward(ds.features().row(i)))));
        CHECK(feats[i].student_ce == cross_entropy(ds.observed_labels()[i], softmax(s.forward(ds.features().row(i)))));
        CHECK(feats[i][0] == feats[i].teacher_ce);
        CHECK(feats[i][1] == feats[i].student_ce);
    }
    CHECK_THROWS_AS(collect_features(init_model({4, 2}, 1), s, ds.view()), InvalidInput);
    CHECK_THROWS_AS(collect_features(init_model({3, 3}, 1), s, ds.view()), InvalidInput);
}

TEST_CASE("relabel only touches flagged samples and uses the teacher argmax") {
    const auto ds = inject_noise(generate_synthetic({SyntheticKind::Blobs, 60, 4, 3, 3.0, 8}), 0.3, 2);
    const auto teacher = init_model({4, 6, 3}, 3);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<bool> flags(ds.size());
        for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = uniform01(rng) < 0.4;
        const auto out = relabel(ds, flags, teacher);
        CHECK(out.features() == ds.features());
        CHECK(out.true_labels() == ds.true_labels());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Label expect = flags[i] ? teacher.predict(ds.features().row(i)) : ds.observed_labels()[i];
            CHECK(out.observed_labels()[i] == expect);
            CHECK(out.noise_flags()[i] == (expect != ds.true_labels()[i]));
        }
    }
    CHECK(relabel(ds, std::vector<bool>(ds.size(), false), teacher) == ds);
    CHECK_THROWS_AS(relabel(ds, std::vector<bool>(3, true), teacher), InvalidInput);
}

TEST_CASE("calibration csv lists score and both flags") {
    std::vector<LossFeatures> feats;
    std::vector<bool> flags;
    for (int i = 0; i < 40; ++i) {
        feats.push_back({i < 20 ? 0.1 : 2.0, i < 20 ? 0.2 : 2.5});
        flags.push_back(i >= 20);
    }
    const auto d = train_discriminator(feats, flags, {});
    std::ostringstream os;
    write_calibration_csv(os, feats, d, 0.5, flags);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "teacher_ce,student_ce,score,flag,oracle_flag");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
    }
    CHECK(rows == 40);
}
