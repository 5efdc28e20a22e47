// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nkd {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// One dense layer. Weights are stored row-major with shape (out x in).
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
    double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

/// Feed-forward classifier. Hidden layers apply the activation; the last layer
/// emits raw logits.
class Mlp {
public:
    Mlp() = default;
    /// Zero-initialized model. Throws InvalidConfig for fewer than two dims or a zero dim.
    explicit Mlp(std::vector<std::size_t> layer_dims, Activation act = Activation::Tanh);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t num_classes() const noexcept { return dims_.back(); }
    Activation activation() const noexcept { return act_; }

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    std::size_t parameter_count() const noexcept;

    /// Logits for one input. Throws InvalidInput on a dimension mismatch.
    std::vector<double> forward(std::span<const double> x) const;

    /// Argmax of forward(x); ties go to the lowest class index.
    std::size_t predict(std::span<const double> x) const;

    friend bool operator==(const Mlp& a, const Mlp& b);

private:
    std::vector<std::size_t> dims_;
    Activation act_ = Activation::Tanh;
    std::vector<DenseLayer> layers_;
};

bool operator==(const Mlp& a, const Mlp& b);

/// Weights uniform in +-1/sqrt(fan_in), zero biases; bit-identical for equal seeds.
Mlp init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
               Activation act = Activation::Tanh);

/// Parameter-shaped gradient accumulator.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    explicit Gradients(const Mlp& m);
    void clear();
};

/// Layer outputs kept from a forward pass: activations[0] is the input and
/// activations.back() the logits.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;

    std::span<const double> logits() const noexcept { return activations.back(); }
};

/// forward() that keeps every layer output for a later backward pass.
void forward_traced(const Mlp& m, std::span<const double> x, ForwardTrace& trace);

/// Adds d(loss)/d(params) for one traced sample into `acc`, given d(loss)/d(logits).
void accumulate_gradients(const Mlp& m, const ForwardTrace& trace,
                          std::span<const double> logit_grad, Gradients& acc);

struct OptimizerState {
    double learning_rate = 0.1;
    std::uint64_t step_count = 0;
};

/// theta <- theta - lr * acc / batch_size. Throws TrainingDivergence when any
/// gradient entry is non-finite (parameters are left untouched in that case).
void sgd_step(Mlp& m, const Gradients& acc, std::size_t batch_size, OptimizerState& opt);

/// One mini-batch SGD step on the mean gradient over (inputs[i], logit_grads[i]).
void backward_and_step(Mlp& m, std::span<const std::span<const double>> inputs,
                       std::span<const std::vector<double>> logit_grads, OptimizerState& opt);

/// FNV-1a over the raw parameter bytes; used to detect parameter changes.
std::uint64_t fingerprint(const Mlp& m);

/// Hidden-layer layout of the two model roles.
std::vector<std::size_t> teacher_dims(std::size_t input_dim, std::size_t classes, std::size_t width);
std::vector<std::size_t> student_dims(std::size_t input_dim, std::size_t classes, std::size_t width);

/// Versioned text checkpoint. Values use shortest round-trip formatting, so
/// save followed by load reproduces every parameter bit for bit.
void save_model(const Mlp& m, std::ostream& os);
Mlp load_model(std::istream& is);
void save_model(const Mlp& m, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

} // namespace nkd
