// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nkd {

/// Smallest probability any ProbDist entry may take before a log is applied.
inline constexpr double kProbFloor = 1e-12;

/// Raw class scores produced by a model, one per class.
class LogitVector {
public:
    LogitVector() = default;
    /// Throws InvalidInput for fewer than two entries or non-finite values.
    explicit LogitVector(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

private:
    std::vector<double> values_;
};

/// A categorical distribution whose entries are floored at kProbFloor and sum to one.
class ProbDist {
public:
    ProbDist() = default;

    /// Floors every entry at kProbFloor and renormalizes. Entries must be
    /// finite and non-negative with a positive sum.
    static ProbDist from_probs(std::span<const double> probs);

    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }

private:
    std::vector<double> probs_;
};

/// Max-shifted softmax of logits / temperature.
ProbDist softmax(std::span<const double> logits, double temperature = 1.0);
inline ProbDist softmax(const LogitVector& z, double temperature = 1.0) {
    return softmax(z.values(), temperature);
}

/// -ln p[label].
double cross_entropy(std::size_t label, const ProbDist& p);

/// Forward KL divergence sum_j p_j ln(p_j / q_j).
double kl_div(const ProbDist& p, const ProbDist& q);

/// kl_div(p, q) + kl_div(q, p).
double symmetric_kl(const ProbDist& p, const ProbDist& q);

/// Knobs shared by the distillation losses.
struct DistillOptions {
    double alpha = 0.5;
    /// Softening applied to both distributions inside the KD term only.
    double temperature = 1.0;
};

/// alpha * CE(y, softmax(s)) + (1 - alpha) * symmetric_kl(softmax(t), softmax(s)).
double student_loss(std::size_t label, std::span<const double> teacher_logits,
                    std::span<const double> student_logits, const DistillOptions& opt);

/// Teacher counterpart of student_loss. During epoch 0 the KD weight is forced
/// to zero so the teacher warms up on cross-entropy alone.
double teacher_loss(std::size_t label, std::span<const double> teacher_logits,
                    std::span<const double> student_logits, const DistillOptions& opt,
                    std::size_t epoch);

/// Per-sample loss value together with its gradient w.r.t. one set of logits.
struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Gradient of CE(label, softmax(logits)) w.r.t. logits.
LossGrad cross_entropy_grad(std::size_t label, std::span<const double> logits);

/// Gradient of symmetric_kl(softmax(fixed/T), softmax(moving/T)) w.r.t. `moving`,
/// with `fixed` held constant.
LossGrad symmetric_kl_grad(std::span<const double> fixed, std::span<const double> moving,
                           double temperature = 1.0);

/// student_loss and its gradient w.r.t. the student logits (teacher frozen).
LossGrad student_loss_grad(std::size_t label, std::span<const double> teacher_logits,
                           std::span<const double> student_logits, const DistillOptions& opt);

/// teacher_loss and its gradient w.r.t. the teacher logits (student frozen).
LossGrad teacher_loss_grad(std::size_t label, std::span<const double> teacher_logits,
                           std::span<const double> student_logits, const DistillOptions& opt,
                           std::size_t epoch);

/// Throws InvalidConfig unless alpha is in [0, 1] and temperature is positive.
void validate(const DistillOptions& opt);

} // namespace nkd
