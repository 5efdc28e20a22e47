// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/losses.hpp"

#include "noisykd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nkd {

namespace {

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidInput(std::string(what) + " contains a non-finite value");
    }
}

void check_same_size(std::size_t a, std::size_t b) {
    if (a != b) {
        throw InvalidInput("distribution length mismatch: " + std::to_string(a) + " vs " +
                           std::to_string(b));
    }
}

double kd_weight(const DistillOptions& opt) { return 1.0 - opt.alpha; }

LossGrad mix(std::size_t label, std::span<const double> own, std::span<const double> other,
             double alpha, double temperature) {
    LossGrad out = cross_entropy_grad(label, own);
    if (alpha == 1.0) return out;
    const LossGrad kd = symmetric_kl_grad(other, own, temperature);
    out.loss = alpha * out.loss + (1.0 - alpha) * kd.loss;
    for (std::size_t j = 0; j < out.grad.size(); ++j) {
        out.grad[j] = alpha * out.grad[j] + (1.0 - alpha) * kd.grad[j];
    }
    return out;
}

} // namespace

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) throw InvalidInput("a logit vector needs at least two classes");
    check_finite(values_, "logit vector");
}

ProbDist ProbDist::from_probs(std::span<const double> probs) {
    if (probs.empty()) throw InvalidInput("empty probability vector");
    ProbDist out;
    out.probs_.assign(probs.begin(), probs.end());
    double sum = 0.0;
    for (double& p : out.probs_) {
        if (!std::isfinite(p) || p < 0.0) throw InvalidInput("probabilities must be finite and >= 0");
        p = std::max(p, kProbFloor);
        sum += p;
    }
    for (double& p : out.probs_) p /= sum;
    return out;
}

ProbDist softmax(std::span<const double> logits, double temperature) {
    if (logits.empty()) throw InvalidInput("softmax of an empty vector");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvalidConfig("temperature must be positive and finite");
    }
    check_finite(logits, "logits");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> e(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) e[j] = std::exp((logits[j] - top) / temperature);
    return ProbDist::from_probs(e);
}

double cross_entropy(std::size_t label, const ProbDist& p) {
    if (label >= p.size()) {
        throw InvalidInput("label " + std::to_string(label) + " out of range for " +
                           std::to_string(p.size()) + " classes");
    }
    return -std::log(p[label]);
}

double kl_div(const ProbDist& p, const ProbDist& q) {
    check_same_size(p.size(), q.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) acc += p[j] * (std::log(p[j]) - std::log(q[j]));
    // Rounding can leave a tiny negative residue for p == q.
    return std::max(acc, 0.0);
}

double symmetric_kl(const ProbDist& p, const ProbDist& q) { return kl_div(p, q) + kl_div(q, p); }

void validate(const DistillOptions& opt) {
    if (!(opt.alpha >= 0.0 && opt.alpha <= 1.0)) {
        throw InvalidConfig("alpha must lie in [0, 1], got " + std::to_string(opt.alpha));
    }
    if (!(opt.temperature > 0.0) || !std::isfinite(opt.temperature)) {
        throw InvalidConfig("temperature must be positive and finite");
    }
}

double student_loss(std::size_t label, std::span<const double> teacher_logits,
                    std::span<const double> student_logits, const DistillOptions& opt) {
    validate(opt);
    check_same_size(teacher_logits.size(), student_logits.size());
    const double ce = cross_entropy(label, softmax(student_logits));
    if (opt.alpha == 1.0) return ce;
    const double kd = symmetric_kl(softmax(teacher_logits, opt.temperature),
                                   softmax(student_logits, opt.temperature));
    return opt.alpha * ce + kd_weight(opt) * kd;
}

double teacher_loss(std::size_t label, std::span<const double> teacher_logits,
                    std::span<const double> student_logits, const DistillOptions& opt,
                    std::size_t epoch) {
    validate(opt);
    DistillOptions eff = opt;
    if (epoch == 0) eff.alpha = 1.0;
    // symmetric_kl is symmetric, so the student form applies with roles swapped.
    return student_loss(label, student_logits, teacher_logits, eff);
}

LossGrad cross_entropy_grad(std::size_t label, std::span<const double> logits) {
    const ProbDist p = softmax(logits);
    LossGrad out;
    out.loss = cross_entropy(label, p);
    out.grad.assign(p.probs().begin(), p.probs().end());
    out.grad[label] -= 1.0;
    return out;
}

LossGrad symmetric_kl_grad(std::span<const double> fixed, std::span<const double> moving,
                           double temperature) {
    check_same_size(fixed.size(), moving.size());
    const ProbDist p = softmax(fixed, temperature);
    const ProbDist q = softmax(moving, temperature);
    const std::size_t c = q.size();

    std::vector<double> log_ratio(c); // ln q - ln p
    double kl_qp = 0.0;
    double kl_pq = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        log_ratio[j] = std::log(q[j]) - std::log(p[j]);
        kl_qp += q[j] * log_ratio[j];
        kl_pq -= p[j] * log_ratio[j];
    }

    // d KL(p||q)/dz = q - p; d KL(q||p)/dz = q * (ln q - ln p - KL(q||p)).
    LossGrad out;
    out.loss = std::max(kl_pq, 0.0) + std::max(kl_qp, 0.0);
    out.grad.resize(c);
    for (std::size_t j = 0; j < c; ++j) {
        out.grad[j] = ((q[j] - p[j]) + q[j] * (log_ratio[j] - kl_qp)) / temperature;
    }
    return out;
}

LossGrad student_loss_grad(std::size_t label, std::span<const double> teacher_logits,
                           std::span<const double> student_logits, const DistillOptions& opt) {
    validate(opt);
    check_same_size(teacher_logits.size(), student_logits.size());
    return mix(label, student_logits, teacher_logits, opt.alpha, opt.temperature);
}

LossGrad teacher_loss_grad(std::size_t label, std::span<const double> teacher_logits,
                           std::span<const double> student_logits, const DistillOptions& opt,
                           std::size_t epoch) {
    validate(opt);
    check_same_size(teacher_logits.size(), student_logits.size());
    const double alpha = epoch == 0 ? 1.0 : opt.alpha;
    return mix(label, teacher_logits, student_logits, alpha, opt.temperature);
}

} // namespace nkd
