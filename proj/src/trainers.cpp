// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/trainers.hpp"

#include "noisykd/error.hpp"
#include "noisykd/losses.hpp"
#include "noisykd/metrics.hpp"
#include "noisykd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace nkd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Evaluation {
    double loss = 0.0;
    double metric = 0.0;
    double clean_loss = kNaN;
    double clean_metric = kNaN;
};

Evaluation evaluate(const Mlp& m, const SampleView& view, std::span<const Label> truth) {
    Evaluation ev;
    std::vector<Label> pred(view.size());
    double loss = 0.0, clean_loss = 0.0;
    const bool with_truth = truth.size() == view.size();
    for (std::size_t i = 0; i < view.size(); ++i) {
        const auto z = m.forward(view.x(i));
        const auto p = softmax(z);
        pred[i] = static_cast<Label>(std::max_element(z.begin(), z.end()) - z.begin());
        loss += cross_entropy(view.labels[i], p);
        if (with_truth) clean_loss += cross_entropy(truth[i], p);
    }
    const auto n = static_cast<double>(view.size());
    ev.loss = loss / n;
    ev.metric = task_score(view.metric, pred, view.labels);
    if (with_truth) {
        ev.clean_loss = clean_loss / n;
        ev.clean_metric = task_score(view.metric, pred, truth);
    }
    return ev;
}

double clean_score(const Mlp& m, const SampleView& eval) {
    if (eval.features == nullptr || eval.size() == 0) return kNaN;
    std::vector<Label> pred(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) pred[i] = m.predict(eval.x(i));
    return task_score(eval.metric, pred, eval.labels);
}

class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    /// True when `metric` strictly improves on the best seen so far.
    bool observe(std::size_t epoch, double metric) {
        if (metric > best_) {
            best_ = metric;
            best_epoch_ = epoch;
            since_ = 0;
            return true;
        }
        ++since_;
        return false;
    }

    bool should_stop() const noexcept { return patience_ > 0 && since_ >= patience_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best() const noexcept { return best_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    std::size_t since_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

struct Learner {
    Mlp model;
    OptimizerState opt;
    Gradients grads;
    ForwardTrace trace;

    Learner(Mlp m, double lr) : model(std::move(m)), opt{lr, 0}, grads(model) {}
};

Learner make_teacher(const TrainInputs& in, const TrainConfig& cfg) {
    const auto dims = teacher_dims(in.train.features->cols(), in.train.num_classes, cfg.hidden_width);
    return Learner(init_model(dims, stream_seed(cfg.seed, "init-teacher"), cfg.activation), cfg.learning_rate);
}

Learner make_student(const TrainInputs& in, const TrainConfig& cfg) {
    const auto dims = student_dims(in.train.features->cols(), in.train.num_classes, cfg.hidden_width);
    return Learner(init_model(dims, stream_seed(cfg.seed, "init-student"), cfg.activation), cfg.learning_rate);
}

std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    return order;
}

double finish_epoch_loss(double total, std::size_t n, std::size_t epoch) {
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) {
        throw TrainingDivergence("non-finite training loss in epoch " + std::to_string(epoch));
    }
    return mean;
}

/// One pass of mini-batch SGD on a single model. `objective(i, logits)`
/// returns the loss of sample i and its gradient w.r.t. the logits.
template <typename Objective>
double run_epoch(Learner& l, const SampleView& train, const std::vector<std::size_t>& order, std::size_t batch,
                 std::size_t epoch, Objective&& objective) {
    double total = 0.0;
    const std::size_t n = order.size();
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t end = std::min(n, start + batch);
        l.grads.clear();
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = order[k];
            forward_traced(l.model, train.x(i), l.trace);
            const LossGrad lg = objective(i, l.trace.logits());
            total += lg.loss;
            accumulate_gradients(l.model, l.trace, lg.grad, l.grads);
        }
        sgd_step(l.model, l.grads, end - start, l.opt);
    }
    return finish_epoch_loss(total, n, epoch);
}

/// Co-distillation pass: both models see the same batch, both gradients come
/// from the pre-update logits, then both models step.
double run_cd_epoch(Learner& teacher, Learner& student, const SampleView& train, std::span<const Label> labels,
                    const std::vector<std::size_t>& order, const TrainConfig& cfg, std::size_t epoch) {
    const DistillOptions opt{cfg.alpha, cfg.temperature};
    double total = 0.0;
    const std::size_t n = order.size();
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t end = std::min(n, start + cfg.batch_size);
        teacher.grads.clear();
        student.grads.clear();
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = order[k];
            forward_traced(teacher.model, train.x(i), teacher.trace);
            forward_traced(student.model, train.x(i), student.trace);
            const auto t_logits = teacher.trace.logits();
            const auto s_logits = student.trace.logits();
            const LossGrad sg = student_loss_grad(labels[i], t_logits, s_logits, opt);
            const LossGrad tg = teacher_loss_grad(labels[i], t_logits, s_logits, opt, epoch);
            total += sg.loss;
            accumulate_gradients(student.model, student.trace, sg.grad, student.grads);
            accumulate_gradients(teacher.model, teacher.trace, tg.grad, teacher.grads);
        }
        sgd_step(student.model, student.grads, end - start, student.opt);
        sgd_step(teacher.model, teacher.grads, end - start, teacher.opt);
    }
    return finish_epoch_loss(total, n, epoch);
}

EpochRecord record(std::size_t epoch, double train_loss, const Mlp& student, const TrainInputs& in,
                   const Mlp* teacher) {
    const Evaluation ev = evaluate(student, in.val, in.oracle.val_true_labels);
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = train_loss;
    r.val_loss = ev.loss;
    r.val_metric = ev.metric;
    r.clean_val_loss = ev.clean_loss;
    r.clean_val_metric = ev.clean_metric;
    r.student_fingerprint = fingerprint(student);
    if (teacher != nullptr) {
        const Evaluation tev = evaluate(*teacher, in.val, in.oracle.val_true_labels);
        r.teacher_val_loss = tev.loss;
        r.teacher_fingerprint = fingerprint(*teacher);
        r.teacher_val_metric = tev.metric;
        r.teacher_clean_val_metric = tev.clean_metric;
    }
    return r;
}

std::vector<std::vector<double>> logits_for(const Mlp& m, const SampleView& view) {
    std::vector<std::vector<double>> out(view.size());
    for (std::size_t i = 0; i < view.size(); ++i) out[i] = m.forward(view.x(i));
    return out;
}

std::uint64_t digest(const std::vector<std::vector<double>>& rows) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : rows) {
        for (double d : r) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof bits);
            h = (h ^ bits) * 0x100000001b3ULL;
        }
    }
    return h;
}

void check_inputs(const TrainInputs& in) {
    if (in.train.features == nullptr || in.val.features == nullptr) throw InvalidInput("missing train or val data");
    if (in.train.size() == 0 || in.val.size() == 0) throw InvalidInput("empty train or val data");
    if (in.train.features->cols() != in.val.features->cols()) {
        throw InvalidInput("train and val feature dims differ");
    }
    if (in.train.num_classes != in.val.num_classes) throw InvalidInput("train and val class counts differ");
    if (in.train.features->rows() != in.train.size() || in.val.features->rows() != in.val.size()) {
        throw InvalidInput("labels and features differ in count");
    }
}

ExperimentResult start_result(const TrainConfig& cfg, Method method) {
    validate(cfg);
    if (cfg.method != method) {
        throw InvalidConfig("config selects " + to_string(cfg.method) + " but " + to_string(method) + " was invoked");
    }
    ExperimentResult res;
    res.method = method;
    res.alpha = cfg.alpha;
    res.seed = cfg.seed;
    return res;
}

void finish(ExperimentResult& res, const EarlyStopper& stop, Mlp student, std::optional<Mlp> teacher,
            const TrainInputs& in) {
    res.best_epoch = stop.best_epoch();
    res.best_val_metric = stop.best();
    res.student_clean_metric = clean_score(student, in.oracle.eval);
    if (teacher) res.teacher_clean_metric = clean_score(*teacher, in.oracle.eval);
    res.student = std::move(student);
    res.teacher = std::move(teacher);
}

auto cross_entropy_objective(std::span<const Label> labels) {
    return [labels](std::size_t i, std::span<const double> logits) { return cross_entropy_grad(labels[i], logits); };
}

/// Plain CE training with early stopping; returns the best checkpoint.
Mlp fit_cross_entropy(Learner& l, const TrainInputs& in, const TrainConfig& cfg, Rng& shuffle_rng,
                      std::vector<EpochRecord>& records, EarlyStopper& stop) {
    Mlp best = l.model;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(in.train.size(), shuffle_rng);
        const double loss = run_epoch(l, in.train, order, cfg.batch_size, e, cross_entropy_objective(in.train.labels));
        records.push_back(record(e, loss, l.model, in, nullptr));
        if (stop.observe(e, records.back().val_metric)) best = l.model;
        if (stop.should_stop()) break;
    }
    return best;
}

void refine_labels(const Learner& teacher, const Learner& student, const TrainInputs& in, const TrainConfig& cfg,
                   std::size_t epoch, std::vector<Label>& labels, ExperimentResult& res) {
    RelabelStats stats;
    stats.after_epoch = epoch;
    const auto val_features = collect_features(teacher.model, student.model, in.val);
    ForestParams params = cfg.forest;
    params.seed = stream_seed(cfg.seed, "discriminator");
    Discriminator disc;
    try {
        disc = train_discriminator(val_features, *in.val_noise_flags, params);
    } catch (const DegenerateLabels& e) {
        stats.skipped_reason = e.what();
        res.warnings.push_back(std::string("label refinement skipped: ") + e.what());
        res.relabel = stats;
        return;
    }

    const SampleView current{in.train.features, labels, in.train.num_classes, in.train.metric};
    const auto features = collect_features(teacher.model, student.model, current);
    const auto flags = flag_noisy(disc, features, cfg.flag_threshold);
    auto refined = relabel_labels(current, flags, teacher.model);

    stats.performed = true;
    stats.flagged_count = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    for (std::size_t i = 0; i < labels.size(); ++i) stats.changed_count += refined[i] != labels[i];

    const auto truth = in.oracle.train_true_labels;
    if (truth.size() == labels.size()) {
        std::size_t hits = 0, noisy = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const bool oracle_noisy = labels[i] != truth[i];
            noisy += oracle_noisy;
            hits += oracle_noisy && flags[i];
        }
        stats.flag_precision = stats.flagged_count ? static_cast<double>(hits) / stats.flagged_count : 0.0;
        stats.flag_recall = noisy ? static_cast<double>(hits) / noisy : 0.0;
        stats.agreement_before = label_agreement(labels, truth);
        stats.agreement_after = label_agreement(refined, truth);
        if (cfg.keep_calibration) {
            res.calibration.reserve(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                res.calibration.push_back({features[i], disc.score(features[i]), flags[i], labels[i] != truth[i]});
            }
        }
    }
    labels = std::move(refined);
    res.relabel = stats;
}

ExperimentResult co_distill_loop(const TrainInputs& in, const TrainConfig& cfg, Method method) {
    ExperimentResult res = start_result(cfg, method);
    check_inputs(in);
    const bool refine = method == Method::CoDistillRefine;
    if (refine && in.val_noise_flags == nullptr) throw InvalidInput("label refinement needs validation noise flags");
    if (refine && in.val_noise_flags->size() != in.val.size()) throw InvalidInput("validation flags differ in length");

    Learner teacher = make_teacher(in, cfg);
    Learner student = make_student(in, cfg);
    Rng shuffle_rng = make_stream(cfg.seed, "shuffle");
    EarlyStopper stop(cfg.early_stopping_patience);
    std::vector<Label> labels(in.train.labels.begin(), in.train.labels.end());
    Mlp best_student = student.model;
    Mlp best_teacher = teacher.model;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(in.train.size(), shuffle_rng);
        const double loss = run_cd_epoch(teacher, student, in.train, labels, order, cfg, e);
        res.epochs.push_back(record(e, loss, student.model, in, &teacher.model));
        if (stop.observe(e, res.epochs.back().val_metric)) {
            best_student = student.model;
            best_teacher = teacher.model;
        }
        if (refine && e + 1 == cfg.refine_epoch) refine_labels(teacher, student, in, cfg, e, labels, res);
        if (stop.should_stop()) break;
    }
    if (refine && !res.relabel) {
        res.warnings.push_back("training stopped before the refinement epoch");
        RelabelStats stats;
        stats.skipped_reason = "stopped early";
        res.relabel = stats;
    }
    finish(res, stop, std::move(best_student), std::move(best_teacher), in);
    return res;
}

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::NoKd: return "NO_KD";
    case Method::Vanilla: return "VANILLA";
    case Method::SelfDistill: return "SELF_DSTL";
    case Method::CoDistill: return "CD";
    case Method::CoDistillRefine: return "CD_LR";
    }
    return "NO_KD";
}

Method method_from_string(const std::string& s) {
    for (Method m : {Method::NoKd, Method::Vanilla, Method::SelfDistill, Method::CoDistill, Method::CoDistillRefine}) {
        if (s == to_string(m)) return m;
    }
    throw InvalidConfig("unknown method '" + s + "' (expected NO_KD, VANILLA, SELF_DSTL, CD or CD_LR)");
}

bool uses_alpha(Method m) { return m != Method::NoKd; }

bool has_teacher(Method m) {
    return m == Method::Vanilla || m == Method::CoDistill || m == Method::CoDistillRefine;
}

void validate(const TrainConfig& cfg) {
    validate(DistillOptions{cfg.alpha, cfg.temperature});
    if (cfg.epochs == 0) throw InvalidConfig("epochs must be positive");
    if (cfg.refine_epoch == 0) throw InvalidConfig("refine_epoch must be positive");
    if (cfg.refine_epoch >= cfg.epochs) throw InvalidConfig("refine_epoch must be smaller than epochs");
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw InvalidConfig("learning_rate must be positive");
    }
    if (cfg.batch_size == 0) throw InvalidConfig("batch_size must be positive");
    if (cfg.hidden_width < 2) throw InvalidConfig("hidden_width must be at least 2");
    if (!(cfg.flag_threshold >= 0.0) || !std::isfinite(cfg.flag_threshold)) {
        throw InvalidConfig("flag_threshold must be finite and >= 0");
    }
}

TrainInputs make_inputs(const LabeledDataset& train, const LabeledDataset& val, const LabeledDataset* eval) {
    TrainInputs in;
    in.train = train.view();
    in.val = val.view();
    in.val_noise_flags = &val.noise_flags();
    in.oracle.val_true_labels = val.true_labels();
    in.oracle.train_true_labels = train.true_labels();
    in.oracle.eval = eval ? eval->oracle_view() : val.oracle_view();
    return in;
}

ExperimentResult train_no_kd(const TrainInputs& in, const TrainConfig& cfg) {
    ExperimentResult res = start_result(cfg, Method::NoKd);
    check_inputs(in);
    Learner student = make_student(in, cfg);
    Rng shuffle_rng = make_stream(cfg.seed, "shuffle");
    EarlyStopper stop(cfg.early_stopping_patience);
    Mlp best = fit_cross_entropy(student, in, cfg, shuffle_rng, res.epochs, stop);
    finish(res, stop, std::move(best), std::nullopt, in);
    return res;
}

ExperimentResult train_vanilla_kd(const TrainInputs& in, const TrainConfig& cfg) {
    ExperimentResult res = start_result(cfg, Method::Vanilla);
    check_inputs(in);

    // Phase 1: teacher on hard labels, kept at its best noisy-val checkpoint.
    Learner teacher = make_teacher(in, cfg);
    Rng teacher_rng = make_stream(cfg.seed, "shuffle-teacher");
    EarlyStopper teacher_stop(cfg.early_stopping_patience);
    const Mlp frozen = fit_cross_entropy(teacher, in, cfg, teacher_rng, res.teacher_epochs, teacher_stop);
    const auto teacher_logits = logits_for(frozen, in.train);

    // Phase 2: student against the frozen teacher.
    const DistillOptions opt{cfg.alpha, cfg.temperature};
    Learner student = make_student(in, cfg);
    Rng shuffle_rng = make_stream(cfg.seed, "shuffle");
    EarlyStopper stop(cfg.early_stopping_patience);
    Mlp best = student.model;
    const auto labels = in.train.labels;
    auto objective = [&](std::size_t i, std::span<const double> logits) {
        return student_loss_grad(labels[i], teacher_logits[i], logits, opt);
    };
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(in.train.size(), shuffle_rng);
        const double loss = run_epoch(student, in.train, order, cfg.batch_size, e, objective);
        res.epochs.push_back(record(e, loss, student.model, in, nullptr));
        if (stop.observe(e, res.epochs.back().val_metric)) best = student.model;
        if (stop.should_stop()) break;
    }
    finish(res, stop, std::move(best), frozen, in);
    return res;
}

ExperimentResult train_self_distill(const TrainInputs& in, const TrainConfig& cfg) {
    ExperimentResult res = start_result(cfg, Method::SelfDistill);
    check_inputs(in);
    const DistillOptions opt{cfg.alpha, cfg.temperature};
    Learner student = make_student(in, cfg);
    Rng shuffle_rng = make_stream(cfg.seed, "shuffle");
    EarlyStopper stop(cfg.early_stopping_patience);
    Mlp best = student.model;
    Mlp best_warm = student.model;
    double best_warm_metric = -std::numeric_limits<double>::infinity();
    const auto labels = in.train.labels;

    std::optional<const std::vector<std::vector<double>>> self_targets;
    std::uint64_t targets_digest = 0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto order = epoch_order(in.train.size(), shuffle_rng);
        double loss = 0.0;
        if (e < cfg.refine_epoch) {
            loss = run_epoch(student, in.train, order, cfg.batch_size, e, cross_entropy_objective(labels));
        } else {
            if (!self_targets) {
                self_targets.emplace(logits_for(best_warm, in.train));
                targets_digest = digest(*self_targets);
            }
            const auto& targets = *self_targets;
            loss = run_epoch(student, in.train, order, cfg.batch_size, e,
                             [&](std::size_t i, std::span<const double> logits) {
                                 return student_loss_grad(labels[i], targets[i], logits, opt);
                             });
        }
        res.epochs.push_back(record(e, loss, student.model, in, nullptr));
        const double metric = res.epochs.back().val_metric;
        if (e < cfg.refine_epoch && metric > best_warm_metric) {
            best_warm_metric = metric;
            best_warm = student.model;
        }
        if (stop.observe(e, metric)) best = student.model;
        if (stop.should_stop()) break;
    }
    if (self_targets && digest(*self_targets) != targets_digest) {
        throw StateError("cached self-distillation targets changed during training");
    }
    finish(res, stop, std::move(best), std::nullopt, in);
    return res;
}

ExperimentResult train_co_distill(const TrainInputs& in, const TrainConfig& cfg) {
    return co_distill_loop(in, cfg, Method::CoDistill);
}

ExperimentResult train_cd_lr(const TrainInputs& in, const TrainConfig& cfg) {
    return co_distill_loop(in, cfg, Method::CoDistillRefine);
}

ExperimentResult train(const TrainInputs& in, const TrainConfig& cfg) {
    switch (cfg.method) {
    case Method::NoKd: return train_no_kd(in, cfg);
    case Method::Vanilla: return train_vanilla_kd(in, cfg);
    case Method::SelfDistill: return train_self_distill(in, cfg);
    case Method::CoDistill: return train_co_distill(in, cfg);
    case Method::CoDistillRefine: return train_cd_lr(in, cfg);
    }
    throw InvalidConfig("unknown method");
}

} // namespace nkd
