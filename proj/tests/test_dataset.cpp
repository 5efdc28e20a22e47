// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/error.hpp"
#include "noisykd/dataset.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

using namespace nkd;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
    const auto p = fs::temp_directory_path() / ("nkd_" + name);
    std::ofstream(p) << body;
    return p;
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
    std::vector<std::size_t> v(b - a);
    std::iota(v.begin(), v.end(), a);
    return v;
}

} // namespace

TEST_CASE("synthetic generators are deterministic and balanced") {
    for (auto kind : {SyntheticKind::Blobs, SyntheticKind::TwoMoons, SyntheticKind::BagOfWords}) {
        SyntheticSpec spec{kind, 400, 8, 2, 3.0, 7};
        const auto a = generate_synthetic(spec);
        const auto b = generate_synthetic(spec);
        CHECK(a == b);
        CHECK(a.size() == 400);
        CHECK(a.noisy_count() == 0);
        CHECK(a.observed_labels() == a.true_labels());
        std::size_t ones = 0;
        for (auto y : a.true_labels()) ones += y;
        CHECK(ones == 200);
        spec.seed = 8;
        CHECK_FALSE(generate_synthetic(spec) == a);
    }
    CHECK_THROWS_AS(generate_synthetic({SyntheticKind::Blobs, 400, 2, 5, 3.0, 1}), InvalidConfig);
    CHECK_THROWS_AS(generate_synthetic({SyntheticKind::Blobs, 10, 8, 2, 3.0, 1}), InvalidConfig);
}

TEST_CASE("blobs separation controls linear separability") {
    // An independent logistic probe should find well-separated blobs nearly
    // perfectly and overlapping blobs clearly worse.
    const auto easy = generate_synthetic({SyntheticKind::Blobs, 600, 8, 2, 5.0, 3});
    const auto hard = generate_synthetic({SyntheticKind::Blobs, 600, 8, 2, 0.5, 3});
    const auto fit = range(0, 400), held = range(400, 600);
    const double acc_easy = test::LinearProbe(easy, fit).accuracy(easy, held);
    const double acc_hard = test::LinearProbe(hard, fit).accuracy(hard, held);
    CHECK(acc_easy > 0.97);
    CHECK(acc_hard < acc_easy - 0.1);

    const auto four = generate_synthetic({SyntheticKind::Blobs, 800, 8, 4, 5.0, 3});
    CHECK(test::LinearProbe(four, range(0, 600)).accuracy(four, range(600, 800)) > 0.95);
}

TEST_CASE("split has the requested sizes and is disjoint") {
    const auto ds = generate_synthetic({SyntheticKind::Blobs, 1000, 4, 2, 3.0, 1});
    const auto [train, val] = split_train_val(ds, {0.10, 5});
    CHECK(train.size() == 900);
    CHECK(val.size() == 100);

    // Every row lands on exactly one side: compare multisets of first features.
    std::multiset<double> all, parts;
    for (std::size_t i = 0; i < ds.size(); ++i) all.insert(ds.features().row(i)[0]);
    for (std::size_t i = 0; i < train.size(); ++i) parts.insert(train.features().row(i)[0]);
    for (std::size_t i = 0; i < val.size(); ++i) parts.insert(val.features().row(i)[0]);
    CHECK(all == parts);

    const auto again = split_train_val(ds, {0.10, 5});
    CHECK(again.first == train);
    CHECK(again.second == val);
    CHECK_FALSE(split_train_val(ds, {0.10, 6}).second == val);

    const auto tiny = generate_synthetic({SyntheticKind::Blobs, 20, 4, 2, 3.0, 1}).subset(range(0, 9));
    CHECK_THROWS_AS(split_train_val(tiny, {0.10, 1}), InvalidInput);
    CHECK_THROWS_AS(split_train_val(ds, {1.5, 1}), InvalidConfig);
}

TEST_CASE("noise injection flips an exact count to other classes") {
    const auto ds = generate_synthetic({SyntheticKind::Blobs, 1000, 8, 4, 3.0, 2});
    for (double rate : {0.0, 0.1, 0.25, 0.29, 0.5}) {
        const auto noisy = inject_noise(ds, rate, 11);
        const auto expect = static_cast<std::size_t>(std::floor(rate * 1000 + 1e-9));
        CHECK(noisy.noisy_count() == expect);
        CHECK(noisy.true_labels() == ds.true_labels());
        CHECK(noisy.features() == ds.features());
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            CHECK(noisy.noise_flags()[i] == (noisy.observed_labels()[i] != noisy.true_labels()[i]));
        }
        CHECK(inject_noise(ds, rate, 11) == noisy);
    }
    CHECK(inject_noise(ds, 0.0, 3) == ds);

    // Flipped labels spread over all other classes.
    const auto noisy = inject_noise(ds, 0.5, 4);
    std::vector<std::size_t> hist(4 * 4, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) hist[ds.true_labels()[i] * 4 + noisy.observed_labels()[i]]++;
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t o = 0; o < 4; ++o) {
            if (t != o) CHECK(hist[t * 4 + o] > 20);
        }
    }

    CHECK_THROWS_AS(inject_noise(ds, 0.6, 1), InvalidConfig);
    CHECK_THROWS_AS(inject_noise(ds, -0.1, 1), InvalidConfig);
}

TEST_CASE("csv loader") {
    const auto ok = write_temp("ok.csv", "f0,f1,label\n0.5,1.0,0\n-1,2e-1,2\n\n3,4,1\n");
    const auto ds = load_dataset(ok, FileFormat::Csv);
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes() == 3);
    CHECK(ds.features().row(1)[1] == doctest::Approx(0.2));
    CHECK(ds.observed_labels() == std::vector<Label>{0, 2, 1});

    const auto missing = write_temp("missing.csv", "f0,f1,label\n1,2,0\n3,4\n");
    try {
        load_dataset(missing, FileFormat::Csv);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    CHECK_THROWS_AS(load_dataset(write_temp("schema.csv", "f0,f1,label\n1,2,0\n1,2,3,0\n"), FileFormat::Csv),
                    SchemaError);
    CHECK_THROWS_AS(load_dataset(write_temp("empty.csv", ""), FileFormat::Csv), InvalidInput);
    CHECK_THROWS_AS(load_dataset(write_temp("header.csv", "f0,f1,label\n"), FileFormat::Csv), InvalidInput);
    CHECK_THROWS_AS(load_dataset(write_temp("nohdr.csv", "1,2,0\n"), FileFormat::Csv), ParseError);
    CHECK_THROWS_AS(load_dataset(write_temp("badnum.csv", "f0,label\nx,0\n"), FileFormat::Csv), ParseError);
    CHECK_THROWS_AS(load_dataset(write_temp("neg.csv", "f0,label\n1,-1\n"), FileFormat::Csv), ParseError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/x.csv", FileFormat::Csv), IoError);
}

TEST_CASE("jsonl loader") {
    const auto ok = write_temp("ok.jsonl", "{\"features\":[1,2],\"label\":1}\n{\"features\":[3,4.5],\"label\":0}\n");
    const auto ds = load_dataset(ok, FileFormat::Jsonl);
    CHECK(ds.size() == 2);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.features().row(1)[1] == 4.5);

    CHECK_THROWS_AS(load_dataset(write_temp("bad.jsonl", "{\"features\":[1,2],\"label\":1}\n{oops\n"),
                                 FileFormat::Jsonl),
                    ParseError);
    CHECK_THROWS_AS(load_dataset(write_temp("nolabel.jsonl", "{\"features\":[1,2]}\n"), FileFormat::Jsonl),
                    ParseError);
    CHECK_THROWS_AS(load_dataset(write_temp("dims.jsonl",
                                            "{\"features\":[1,2],\"label\":1}\n{\"features\":[1],\"label\":0}\n"),
                                 FileFormat::Jsonl),
                    SchemaError);
    CHECK_THROWS_AS(load_dataset(write_temp("empty.jsonl", "\n"), FileFormat::Jsonl), InvalidInput);
}

TEST_CASE("dump round trip keeps the oracle section") {
    const auto ds = inject_noise(generate_synthetic({SyntheticKind::TwoMoons, 200, 2, 2, 1.0, 9}), 0.25, 1)
                        .with_metric(TaskMetric::Mcc);
    const auto p = fs::temp_directory_path() / "nkd_roundtrip.json";
    save_dataset(ds, p, FileFormat::Dump);
    const auto back = load_dataset(p, FileFormat::Dump);
    CHECK(back == ds);
    CHECK(back.noisy_count() == 50);

    const auto csv = fs::temp_directory_path() / "nkd_roundtrip.csv";
    save_dataset(ds, csv, FileFormat::Csv);
    const auto back_csv = load_dataset(csv, FileFormat::Csv);
    CHECK(back_csv.features() == ds.features());
    CHECK(back_csv.observed_labels() == ds.observed_labels());

    CHECK(file_format_from_path("a/b.jsonl") == FileFormat::Jsonl);
    CHECK(file_format_from_path("a/b.csv") == FileFormat::Csv);
    CHECK(file_format_from_path("a/b.json") == FileFormat::Dump);
    CHECK_THROWS_AS(file_format_from_string("parquet"), InvalidConfig);
}

TEST_CASE("dataset invariants") {
    CHECK_THROWS_AS(LabeledDataset(FeatureMatrix(1, 1, {0.0}), {3}, 2), InvalidInput);
    CHECK_THROWS_AS(LabeledDataset(FeatureMatrix(1, 1, {0.0}), {0}, 1), InvalidInput);
    CHECK_THROWS_AS(FeatureMatrix(2, 2, {0.0}), InvalidInput);
    const LabeledDataset ds(FeatureMatrix(2, 1, {0.0, 1.0}), {1, 0}, {1, 1}, 2, TaskMetric::Accuracy);
    CHECK(ds.noise_flags() == std::vector<bool>{false, true});
    CHECK(ds.view().labels[1] == 0);
    CHECK(ds.oracle_view().labels[1] == 1);
}
