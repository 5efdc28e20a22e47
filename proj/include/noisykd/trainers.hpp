// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noisykd/dataset.hpp"
#include "noisykd/mlp.hpp"
#include "noisykd/refinement.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nkd {

enum class Method { NoKd, Vanilla, SelfDistill, CoDistill, CoDistillRefine };

/// NO_KD, VANILLA, SELF_DSTL, CD, CD_LR
std::string to_string(Method m);
Method method_from_string(const std::string& s);
/// Whether the method mixes a KD term weighted by alpha.
bool uses_alpha(Method m);
bool has_teacher(Method m);

struct TrainConfig {
    Method method = Method::CoDistill;
    double alpha = 0.5;
    std::size_t epochs = 30;
    /// Epochs of plain co-distillation before label refinement; also the
    /// warm-up length of self-distillation.
    std::size_t refine_epoch = 2;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    /// 0 disables early stopping.
    std::size_t early_stopping_patience = 5;
    /// Teacher: two hidden layers of this width. Student: one of half the width.
    std::size_t hidden_width = 64;
    Activation activation = Activation::Tanh;
    double temperature = 1.0;
    ForestParams forest;
    double flag_threshold = 0.5;
    /// Keep per-sample discriminator scores of the training set in the result.
    bool keep_calibration = false;
};

/// Throws InvalidConfig on out-of-range fields.
void validate(const TrainConfig& cfg);

/// Oracle data used only to report clean metrics and relabel statistics.
struct OracleProbe {
    std::span<const Label> val_true_labels;
    std::span<const Label> train_true_labels;
    /// Clean slice scored for the final teacher/student metrics.
    SampleView eval;
};

struct TrainInputs {
    SampleView train;
    SampleView val;
    /// Validation noise flags; the only oracle field a training decision may
    /// use (as discriminator targets). Required for CD_LR.
    const std::vector<bool>* val_noise_flags = nullptr;
    OracleProbe oracle;
};

/// Wires datasets into TrainInputs. `eval` defaults to the validation set
/// scored against its true labels. The datasets must outlive the inputs.
TrainInputs make_inputs(const LabeledDataset& train, const LabeledDataset& val,
                        const LabeledDataset* eval = nullptr);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    /// Student cross-entropy on the noisy validation labels.
    double val_loss = 0.0;
    double val_metric = 0.0;
    /// Oracle: the same validation features scored against true labels.
    double clean_val_loss = 0.0;
    double clean_val_metric = 0.0;
    std::optional<double> teacher_val_loss;
    std::optional<double> teacher_val_metric;
    std::optional<double> teacher_clean_val_metric;
    /// fingerprint() of the live parameters at the end of the epoch.
    std::uint64_t student_fingerprint = 0;
    std::optional<std::uint64_t> teacher_fingerprint;
};

struct RelabelStats {
    bool performed = false;
    std::string skipped_reason;
    std::size_t after_epoch = 0;
    std::size_t flagged_count = 0;
    std::size_t changed_count = 0;
    /// Against the training oracle flags; 0 when undefined.
    double flag_precision = 0.0;
    double flag_recall = 0.0;
    double agreement_before = 0.0;
    double agreement_after = 0.0;
};

struct CalibrationRow {
    LossFeatures features;
    double score = 0.0;
    bool flag = false;
    bool oracle_flag = false;
};

struct ExperimentResult {
    Method method = Method::NoKd;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    /// Teacher pre-training curve (VANILLA only).
    std::vector<EpochRecord> teacher_epochs;
    std::size_t best_epoch = 0;
    double best_val_metric = 0.0;
    double student_clean_metric = 0.0;
    std::optional<double> teacher_clean_metric;
    std::optional<RelabelStats> relabel;
    std::vector<CalibrationRow> calibration;
    std::vector<std::string> warnings;
    /// Checkpoints selected by noisy-validation early stopping.
    Mlp student;
    std::optional<Mlp> teacher;
};

ExperimentResult train_no_kd(const TrainInputs& in, const TrainConfig& cfg);
ExperimentResult train_vanilla_kd(const TrainInputs& in, const TrainConfig& cfg);
ExperimentResult train_self_distill(const TrainInputs& in, const TrainConfig& cfg);
ExperimentResult train_co_distill(const TrainInputs& in, const TrainConfig& cfg);
ExperimentResult train_cd_lr(const TrainInputs& in, const TrainConfig& cfg);

/// Dispatches on cfg.method.
ExperimentResult train(const TrainInputs& in, const TrainConfig& cfg);

} // namespace nkd
