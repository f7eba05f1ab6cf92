#include "cohgrad/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cohgrad {

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear: return "linear";
        case ModelKind::diag_deep: return "diag_deep";
        case ModelKind::two_neuron: return "two_neuron";
        case ModelKind::mlp: return "mlp";
    }
    return "?";
}

const char* to_string(LossKind kind) {
    return kind == LossKind::half_square ? "half_square" : "softmax_cross_entropy";
}

Model::Model(ModelKind kind, LossKind loss, std::vector<std::size_t> widths)
    : kind_(kind), loss_(loss), widths_(std::move(widths)) {}

Model Model::linear(std::size_t dims) {
    if (dims == 0) {
        throw std::invalid_argument("linear model needs at least one input");
    }
    Model m(ModelKind::linear, LossKind::half_square, {dims, 1});
    m.num_params_ = dims;
    m.segments_ = {{"w", 0, dims}};
    return m;
}

Model Model::diag_deep(std::size_t dims) {
    if (dims == 0) {
        throw std::invalid_argument("diag_deep model needs at least one input");
    }
    Model m(ModelKind::diag_deep, LossKind::half_square, {dims, 1});
    m.num_params_ = 2 * dims;
    m.segments_ = {{"u", 0, dims}, {"w", dims, dims}};
    return m;
}

Model Model::two_neuron() {
    Model m(ModelKind::two_neuron, LossKind::half_square, {6, 2, 1});
    m.num_params_ = 13;
    m.segments_ = {{"layer1", 0, 11}, {"layer2", 11, 2}};
    return m;
}

Model Model::mlp(std::vector<std::size_t> widths, LossKind loss) {
    if (widths.size() < 2) {
        throw std::invalid_argument("mlp needs at least input and output widths");
    }
    if (std::find(widths.begin(), widths.end(), std::size_t{0}) != widths.end()) {
        throw std::invalid_argument("mlp layer widths must be positive");
    }
    if (loss == LossKind::softmax_cross_entropy && widths.back() < 2) {
        throw std::invalid_argument("softmax cross-entropy needs at least 2 outputs");
    }
    Model m(ModelKind::mlp, loss, std::move(widths));
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < m.widths_.size(); ++l) {
        const std::size_t len = m.widths_[l + 1] * m.widths_[l] + m.widths_[l + 1];
        m.segments_.push_back({"layer" + std::to_string(l + 1), offset, len});
        offset += len;
    }
    m.num_params_ = offset;
    return m;
}

Vec64 Model::init_params(std::uint64_t seed) const {
    switch (kind_) {
        case ModelKind::linear: return Vec64(num_params_, 0.0);
        case ModelKind::diag_deep:
        case ModelKind::two_neuron: return Vec64(num_params_, 0.01);
        case ModelKind::mlp: break;
    }
    Rng rng(seed);
    Vec64 theta(num_params_, 0.0);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::size_t in = widths_[l];
        const std::size_t out = widths_[l + 1];
        const double a = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < in * out; ++i) {
            theta[offset + i] = rng.uniform(-a, a);
        }
        offset += in * out + out;
    }
    return theta;
}

void Model::check_dims(std::span<const double> params, const Example& ex) const {
    if (params.size() != num_params_) {
        throw ContractViolation("model expects " + std::to_string(num_params_) + " parameters, got " +
                                std::to_string(params.size()));
    }
    if (ex.x.size() != input_dim()) {
        throw ContractViolation("model expects input dimension " + std::to_string(input_dim()) + ", got " +
                                std::to_string(ex.x.size()));
    }
    if (ex.y.size() != output_dim()) {
        throw ContractViolation("model expects target dimension " + std::to_string(output_dim()) + ", got " +
                                std::to_string(ex.y.size()));
    }
}

Vec64 Model::predict(std::span<const double> params, std::span<const double> x) const {
    if (params.size() != num_params_ || x.size() != input_dim()) {
        throw ContractViolation("predict: dimension mismatch");
    }
    const std::size_t d = input_dim();
    switch (kind_) {
        case ModelKind::linear: return {dot(params, x)};
        case ModelKind::diag_deep: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                s += params[d + j] * params[j] * x[j];
            }
            return {s};
        }
        case ModelKind::two_neuron: {
            const double h1 = dot(params.subspan(0, 5), x.subspan(0, 5));
            const double h2 = dot(params.subspan(5, 6), x);
            return {params[11] * h1 + params[12] * h2};
        }
        case ModelKind::mlp: break;
    }
    std::vector<Vec64> acts;
    std::vector<std::size_t> nz;
    mlp_forward(params, x, acts, nz);
    return std::move(acts.back());
}

bool Model::mlp_forward(std::span<const double> params, std::span<const double> x, std::vector<Vec64>& acts,
                        std::vector<std::size_t>& nz) const {
    const std::size_t layers = widths_.size() - 1;
    // acts[l] is the input to layer l (post-ReLU); acts[layers] the raw output.
    acts.assign(layers + 1, Vec64{});
    acts[0].assign(x.begin(), x.end());
    // The first layer skips zero inputs when they dominate; the sums are the
    // same because the skipped products are exact zeros.
    nz.clear();
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) nz.push_back(j);
    }
    const bool sparse_input = nz.size() * 4 < x.size();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = widths_[l];
        const std::size_t n = widths_[l + 1];
        Vec64 z(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = params.data() + offset + i * in;
            double s = 0.0;
            if (l == 0 && sparse_input) {
                for (std::size_t j : nz) s += row[j] * x[j];
            } else {
                const Vec64& a = acts[l];
                for (std::size_t j = 0; j < in; ++j) s += row[j] * a[j];
            }
            z[i] = s + params[offset + in * n + i];
            if (l + 1 < layers) {
                z[i] = std::max(z[i], 0.0);
            }
        }
        acts[l + 1] = std::move(z);
        offset += in * n + n;
    }
    return sparse_input;
}

double Model::loss_from_output(std::span<const double> yhat, std::span<const double> y) const {
    if (loss_ == LossKind::half_square) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - yhat[i];
            s += r * r;
        }
        return 0.5 * s;
    }
    const double zmax = *std::max_element(yhat.begin(), yhat.end());
    double se = 0.0;
    for (double z : yhat) {
        se += std::exp(z - zmax);
    }
    const double lse = zmax + std::log(se);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        l += y[i] * (lse - yhat[i]);
    }
    return l;
}

double Model::loss(std::span<const double> params, const Example& ex) const {
    check_dims(params, ex);
    return loss_from_output(predict(params, ex.x), ex.y);
}

double Model::mlp_loss_and_grad(std::span<const double> params, const Example& ex, std::span<double> out) const {
    const std::size_t layers = widths_.size() - 1;
    std::vector<Vec64> acts;
    std::vector<std::size_t> nz;
    const bool sparse_input = mlp_forward(params, ex.x, acts, nz);
    std::vector<std::size_t> offsets(layers);
    for (std::size_t l = 0, offset = 0; l < layers; ++l) {
        offsets[l] = offset;
        offset += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }

    const Vec64& yhat = acts[layers];
    const double loss = loss_from_output(yhat, ex.y);

    Vec64 delta(yhat.size());
    if (loss_ == LossKind::half_square) {
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] = yhat[i] - ex.y[i];
        }
    } else {
        const double zmax = *std::max_element(yhat.begin(), yhat.end());
        double se = 0.0;
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] = std::exp(yhat[i] - zmax);
            se += delta[i];
        }
        double ysum = 0.0;
        for (double v : ex.y) ysum += v;
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] = ysum * delta[i] / se - ex.y[i];
        }
    }

    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = widths_[l];
        const std::size_t n = widths_[l + 1];
        const std::size_t off = offsets[l];
        const Vec64& a = acts[l];
        for (std::size_t i = 0; i < n; ++i) {
            double* row = out.data() + off + i * in;
            if (l == 0 && sparse_input) {
                std::fill(row, row + in, 0.0);
                for (std::size_t j : nz) row[j] = delta[i] * a[j];
            } else {
                for (std::size_t j = 0; j < in; ++j) {
                    row[j] = delta[i] * a[j];
                }
            }
            out[off + in * n + i] = delta[i];
        }
        if (l == 0) {
            break;
        }
        Vec64 prev(in, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = params.data() + off + i * in;
            for (std::size_t j = 0; j < in; ++j) {
                prev[j] += row[j] * delta[i];
            }
        }
        // ReLU subgradient at 0 is 0; acts[l] holds the post-activation.
        for (std::size_t j = 0; j < in; ++j) {
            if (!(a[j] > 0.0)) {
                prev[j] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return loss;
}

double Model::loss_and_grad(std::span<const double> params, const Example& ex, std::span<double> out) const {
    check_dims(params, ex);
    if (out.size() != num_params_) {
        throw ContractViolation("gradient buffer has wrong length");
    }
    const std::size_t d = input_dim();
    const auto& x = ex.x;
    switch (kind_) {
        case ModelKind::linear: {
            const double r = ex.y[0] - dot(params, x);
            for (std::size_t j = 0; j < d; ++j) {
                out[j] = -r * x[j];
            }
            return 0.5 * r * r;
        }
        case ModelKind::diag_deep: {
            const double r = ex.y[0] - predict(params, x)[0];
            for (std::size_t j = 0; j < d; ++j) {
                out[j] = -r * params[d + j] * x[j];
                out[d + j] = -r * params[j] * x[j];
            }
            return 0.5 * r * r;
        }
        case ModelKind::two_neuron: {
            const double h1 = dot(params.subspan(0, 5), std::span<const double>(x).subspan(0, 5));
            const double h2 = dot(params.subspan(5, 6), x);
            const double r = ex.y[0] - (params[11] * h1 + params[12] * h2);
            for (std::size_t j = 0; j < 5; ++j) {
                out[j] = -r * params[11] * x[j];
            }
            for (std::size_t j = 0; j < 6; ++j) {
                out[5 + j] = -r * params[12] * x[j];
            }
            out[11] = -r * h1;
            out[12] = -r * h2;
            return 0.5 * r * r;
        }
        case ModelKind::mlp: break;
    }
    return mlp_loss_and_grad(params, ex, out);
}

Vec64 Model::grad(std::span<const double> params, const Example& ex) const {
    Vec64 g(num_params_);
    loss_and_grad(params, ex, g);
    return g;
}

Mat64 Model::per_example_grads(std::span<const double> params, const std::vector<Example>& examples) const {
    Mat64 g(examples.size(), num_params_);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        loss_and_grad(params, examples[i], g.row(i));
    }
    return g;
}

Mat64 Model::per_example_grads(std::span<const double> params, const std::vector<Example>& examples,
                               std::span<const std::size_t> indices) const {
    Mat64 g(indices.size(), num_params_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        loss_and_grad(params, examples.at(indices[i]), g.row(i));
    }
    return g;
}

bool Model::correct(std::span<const double> params, const Example& ex) const {
    const Vec64 yhat = predict(params, ex.x);
    if (ex.y.size() > 1) {
        return argmax(yhat) == argmax(ex.y);
    }
    return std::abs(yhat[0] - ex.y[0]) < 0.5;
}

EvalResult evaluate(const Model& model, std::span<const double> params, const std::vector<Example>& examples) {
    EvalResult r;
    r.count = examples.size();
    if (examples.empty()) {
        return r;
    }
    double loss = 0.0;
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        model.check_dims(params, ex);
        const Vec64 yhat = model.predict(params, ex.x);
        loss += model.loss_from_output(yhat, ex.y);
        const bool ok = ex.y.size() > 1 ? argmax(yhat) == argmax(ex.y) : std::abs(yhat[0] - ex.y[0]) < 0.5;
        hits += ok ? 1 : 0;
    }
    r.loss = loss / static_cast<double>(examples.size());
    r.accuracy = static_cast<double>(hits) / static_cast<double>(examples.size());
    return r;
}

}  // namespace cohgrad
