// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/mlp.hpp"

#include "noisykd/error.hpp"
#include "noisykd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace nkd {

namespace {

constexpr const char* kCheckpointMagic = "noisykd-mlp";
constexpr int kCheckpointVersion = 1;

double activate(Activation a, double v) {
    return a == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
}

// Derivative expressed through the activation output.
double activate_grad(Activation a, double out) {
    return a == Activation::Tanh ? 1.0 - out * out : (out > 0.0 ? 1.0 : 0.0);
}

void dense(const DenseLayer& l, std::span<const double> in, std::vector<double>& out) {
    out.resize(l.out);
    for (std::size_t r = 0; r < l.out; ++r) {
        const double* row = l.weights.data() + r * l.in;
        double acc = l.bias[r];
        for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * in[c];
        out[r] = acc;
    }
}

void check_input(const Mlp& m, std::span<const double> x) {
    if (x.size() != m.input_dim()) {
        throw InvalidInput("input has " + std::to_string(x.size()) + " features, model expects " +
                           std::to_string(m.input_dim()));
    }
}

void write_double(std::ostream& os, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
}

double read_double(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw ParseError(0, "checkpoint truncated");
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ParseError(0, "bad number in checkpoint: " + tok);
    }
    return v;
}

} // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw InvalidConfig("unknown activation '" + s + "'");
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, Activation act) : dims_(std::move(layer_dims)), act_(act) {
    if (dims_.size() < 2) throw InvalidConfig("a model needs at least an input and an output dim");
    for (std::size_t d : dims_) {
        if (d == 0) throw InvalidConfig("layer dims must be positive");
    }
    layers_.reserve(dims_.size() - 1);
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
        DenseLayer l;
        l.in = dims_[i];
        l.out = dims_[i + 1];
        l.weights.assign(l.in * l.out, 0.0);
        l.bias.assign(l.out, 0.0);
        layers_.push_back(std::move(l));
    }
}

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    check_input(*this, x);
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        dense(layers_[i], cur, next);
        if (i + 1 < layers_.size()) {
            for (double& v : next) v = activate(act_, v);
        }
        std::swap(cur, next);
    }
    return cur;
}

std::size_t Mlp::predict(std::span<const double> x) const {
    const auto z = forward(x);
    std::size_t best = 0;
    for (std::size_t j = 1; j < z.size(); ++j) {
        if (z[j] > z[best]) best = j;
    }
    return best;
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (a.dims_ != b.dims_ || a.act_ != b.act_) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias) {
            return false;
        }
    }
    return true;
}

Mlp init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed, Activation act) {
    Mlp m(layer_dims, act);
    Rng rng(seed);
    for (auto& l : m.layers()) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (double& w : l.weights) w = (2.0 * uniform01(rng) - 1.0) * scale;
    }
    return m;
}

Gradients::Gradients(const Mlp& m) {
    for (const auto& l : m.layers()) {
        weights.emplace_back(l.weights.size(), 0.0);
        bias.emplace_back(l.bias.size(), 0.0);
    }
}

void Gradients::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void forward_traced(const Mlp& m, std::span<const double> x, ForwardTrace& trace) {
    check_input(m, x);
    const auto& layers = m.layers();
    trace.activations.resize(layers.size() + 1);
    trace.activations[0].assign(x.begin(), x.end());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& out = trace.activations[i + 1];
        dense(layers[i], trace.activations[i], out);
        if (i + 1 < layers.size()) {
            for (double& v : out) v = activate(m.activation(), v);
        }
    }
}

void accumulate_gradients(const Mlp& m, const ForwardTrace& trace,
                          std::span<const double> logit_grad, Gradients& acc) {
    const auto& layers = m.layers();
    if (logit_grad.size() != m.num_classes()) throw InvalidInput("logit gradient has the wrong length");
    std::vector<double> delta(logit_grad.begin(), logit_grad.end());
    std::vector<double> prev;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        const auto& in = trace.activations[li];
        auto& gw = acc.weights[li];
        auto& gb = acc.bias[li];
        for (std::size_t r = 0; r < l.out; ++r) {
            const double d = delta[r];
            gb[r] += d;
            double* row = gw.data() + r * l.in;
            for (std::size_t c = 0; c < l.in; ++c) row[c] += d * in[c];
        }
        if (li == 0) break;
        prev.assign(l.in, 0.0);
        for (std::size_t r = 0; r < l.out; ++r) {
            const double d = delta[r];
            const double* row = l.weights.data() + r * l.in;
            for (std::size_t c = 0; c < l.in; ++c) prev[c] += d * row[c];
        }
        for (std::size_t c = 0; c < l.in; ++c) prev[c] *= activate_grad(m.activation(), in[c]);
        std::swap(delta, prev);
    }
}

void sgd_step(Mlp& m, const Gradients& acc, std::size_t batch_size, OptimizerState& opt) {
    if (!(opt.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
    if (batch_size == 0) throw InvalidInput("empty batch");
    auto check = [](const std::vector<double>& v, std::size_t layer) {
        for (double g : v) {
            if (!std::isfinite(g)) {
                throw TrainingDivergence("non-finite gradient in layer " + std::to_string(layer));
            }
        }
    };
    for (std::size_t i = 0; i < acc.weights.size(); ++i) {
        check(acc.weights[i], i);
        check(acc.bias[i], i);
    }
    const double step = opt.learning_rate / static_cast<double>(batch_size);
    auto& layers = m.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (std::size_t k = 0; k < layers[i].weights.size(); ++k) layers[i].weights[k] -= step * acc.weights[i][k];
        for (std::size_t k = 0; k < layers[i].bias.size(); ++k) layers[i].bias[k] -= step * acc.bias[i][k];
    }
    ++opt.step_count;
}

void backward_and_step(Mlp& m, std::span<const std::span<const double>> inputs,
                       std::span<const std::vector<double>> logit_grads, OptimizerState& opt) {
    if (inputs.size() != logit_grads.size()) throw InvalidInput("inputs and gradients differ in count");
    Gradients acc(m);
    ForwardTrace trace;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward_traced(m, inputs[i], trace);
        accumulate_gradients(m, trace, logit_grads[i], acc);
    }
    sgd_step(m, acc, inputs.size(), opt);
}

std::uint64_t fingerprint(const Mlp& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::vector<double>& v) {
        for (double d : v) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &d, sizeof d);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& l : m.layers()) {
        mix(l.weights);
        mix(l.bias);
    }
    return h;
}

std::vector<std::size_t> teacher_dims(std::size_t input_dim, std::size_t classes, std::size_t width) {
    return {input_dim, width, width, classes};
}

std::vector<std::size_t> student_dims(std::size_t input_dim, std::size_t classes, std::size_t width) {
    return {input_dim, std::max<std::size_t>(1, width / 2), classes};
}

void save_model(const Mlp& m, std::ostream& os) {
    os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    os << "activation " << to_string(m.activation()) << '\n';
    os << "dims " << m.layer_dims().size();
    for (std::size_t d : m.layer_dims()) os << ' ' << d;
    os << '\n';
    for (const auto& l : m.layers()) {
        for (std::size_t r = 0; r < l.out; ++r) {
            for (std::size_t c = 0; c < l.in; ++c) {
                if (c) os << ' ';
                write_double(os, l.w(r, c));
            }
            os << '\n';
        }
        for (std::size_t r = 0; r < l.out; ++r) {
            if (r) os << ' ';
            write_double(os, l.bias[r]);
        }
        os << '\n';
    }
}

Mlp load_model(std::istream& is) {
    std::string magic, key;
    int version = 0;
    if (!(is >> magic >> version) || magic != kCheckpointMagic) throw ParseError(1, "not a model checkpoint");
    if (version != kCheckpointVersion) {
        throw SchemaError("unsupported checkpoint version " + std::to_string(version));
    }
    std::string act;
    if (!(is >> key >> act) || key != "activation") throw ParseError(2, "missing activation");
    std::size_t count = 0;
    if (!(is >> key >> count) || key != "dims") throw ParseError(3, "missing dims");
    std::vector<std::size_t> dims(count);
    for (auto& d : dims) {
        if (!(is >> d)) throw ParseError(3, "truncated dims");
    }
    Mlp m(dims, activation_from_string(act));
    for (auto& l : m.layers()) {
        for (double& w : l.weights) w = read_double(is);
        for (double& b : l.bias) b = read_double(is);
    }
    return m;
}

void save_model(const Mlp& m, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    save_model(m, os);
    if (!os) throw IoError("write failed: " + path.string());
}

Mlp load_model(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    return load_model(is);
}

} // namespace nkd
