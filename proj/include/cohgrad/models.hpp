#pragma once

// Small differentiable models with hand-derived per-example gradients.
//
// Parameters live in one flat vector. A model describes how that vector is
// split into named segments (layers) and how to evaluate loss and gradient for
// a single example. Gradients are literal: for the half-square loss,
// grad = -(y - yhat) * d yhat / d theta.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cohgrad/datasets.hpp"
#include "cohgrad/numkit.hpp"

namespace cohgrad {

enum class ModelKind { linear, diag_deep, two_neuron, mlp };
enum class LossKind { half_square, softmax_cross_entropy };

const char* to_string(ModelKind kind);
const char* to_string(LossKind kind);

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

class Model {
public:
    /// y = w . x
    static Model linear(std::size_t dims);
    /// y = (w (.) u) . x; parameters ordered u then w.
    static Model diag_deep(std::size_t dims);
    /// Two hidden linear units over 6 inputs: h1 sees features 1-5, h2 sees all
    /// six; y = w1 h1 + w2 h2. Parameters ordered u(5), v(6), w(2).
    static Model two_neuron();
    /// Fully connected ReLU network. `widths` lists input, hidden..., output.
    /// Per layer the parameters are W (out x in, row-major) then b.
    static Model mlp(std::vector<std::size_t> widths, LossKind loss);

    ModelKind kind() const { return kind_; }
    LossKind loss_kind() const { return loss_; }
    std::size_t num_params() const { return num_params_; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t output_dim() const { return widths_.back(); }
    const std::vector<std::size_t>& widths() const { return widths_; }
    const std::vector<Segment>& segments() const { return segments_; }

    /// Default starting point: zeros for linear, 0.01 everywhere for diag_deep
    /// and two_neuron, U[-1/sqrt(fan_in), 1/sqrt(fan_in)] weights and zero
    /// biases for mlp.
    Vec64 init_params(std::uint64_t seed) const;

    Vec64 predict(std::span<const double> params, std::span<const double> x) const;
    double loss(std::span<const double> params, const Example& ex) const;

    /// Writes the gradient into `out` (length num_params) and returns the loss.
    double loss_and_grad(std::span<const double> params, const Example& ex, std::span<double> out) const;
    Vec64 grad(std::span<const double> params, const Example& ex) const;

    /// One gradient row per example, in input order.
    Mat64 per_example_grads(std::span<const double> params, const std::vector<Example>& examples) const;
    Mat64 per_example_grads(std::span<const double> params, const std::vector<Example>& examples,
                            std::span<const std::size_t> indices) const;

    /// argmax match for classification, |yhat - y| < 0.5 for regression.
    bool correct(std::span<const double> params, const Example& ex) const;

    /// Loss given an already computed output.
    double loss_from_output(std::span<const double> yhat, std::span<const double> y) const;
    void check_dims(std::span<const double> params, const Example& ex) const;

private:
    Model(ModelKind kind, LossKind loss, std::vector<std::size_t> widths);

    /// Fills acts (layer inputs, then output) and the nonzero input indices;
    /// returns whether the sparse first-layer path was used.
    bool mlp_forward(std::span<const double> params, std::span<const double> x, std::vector<Vec64>& acts,
                     std::vector<std::size_t>& nz) const;
    double mlp_loss_and_grad(std::span<const double> params, const Example& ex, std::span<double> out) const;

    ModelKind kind_;
    LossKind loss_;
    std::vector<std::size_t> widths_;
    std::size_t num_params_ = 0;
    std::vector<Segment> segments_;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

/// Mean loss and accuracy over a set of examples (zeros when empty).
EvalResult evaluate(const Model& model, std::span<const double> params, const std::vector<Example>& examples);

}  // namespace cohgrad
