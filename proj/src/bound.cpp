#include "cohgrad/bound.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cohgrad {

void BoundInputs::validate() const {
    if (m == 0) {
        throw std::invalid_argument("bound: m must be positive");
    }
    if (etas.size() != alphas.size()) {
        throw std::invalid_argument("bound: etas and alphas differ in length");
    }
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw std::invalid_argument("bound: alpha values must lie in [0, 1]");
        }
    }
    for (double e : etas) {
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw std::invalid_argument("bound: step sizes must be finite and non-negative");
        }
    }
    if (!(L_lip >= 0.0) || !(beta >= 0.0)) {
        throw std::invalid_argument("bound: L and beta must be non-negative");
    }
}

BoundInputs bound_inputs_from_log(const RunLog& log, double L_lip, double beta) {
    BoundInputs in;
    in.m = log.train_size;
    for (const auto& p : log.trajectory) {
        in.etas.push_back(p.eta);
        in.alphas.push_back(std::clamp(p.alpha, 0.0, 1.0));
    }
    in.L_lip = L_lip;
    in.beta = beta;
    return in;
}

double expansion(std::size_t t, const BoundInputs& in) {
    if (t == 0 || t > in.T()) {
        throw ContractViolation("expansion: t must lie in [1, T]");
    }
    double p = 1.0;
    for (std::size_t k = t + 1; k <= in.T(); ++k) {
        p *= 1.0 + in.etas[k - 1] * in.beta;
    }
    return p;
}

namespace {

double root_term(double a) { return std::sqrt(2.0 * (1.0 - a)); }

}  // namespace

std::vector<BoundTerm> gap_bound_terms(const BoundInputs& in) {
    in.validate();
    const std::size_t T = in.T();
    const double scale = in.L_lip * in.L_lip / static_cast<double>(in.m);
    std::vector<BoundTerm> terms(T);
    double suffix = 1.0;
    for (std::size_t t = T; t >= 1; --t) {
        BoundTerm& b = terms[t - 1];
        b.t = t;
        b.eta = in.etas[t - 1];
        b.alpha = in.alphas[t - 1];
        b.expansion = suffix;
        b.value = scale * suffix * b.eta * root_term(b.alpha);
        suffix *= 1.0 + b.eta * in.beta;
    }
    return terms;
}

double gap_bound(const BoundInputs& in) {
    double s = 0.0;
    for (const auto& term : gap_bound_terms(in)) {
        s += term.value;
    }
    return s;
}

double gap_bound_fixed_eta(const BoundInputs& in) {
    in.validate();
    if (in.T() == 0) {
        return 0.0;
    }
    const double eta = in.etas.front();
    if (std::any_of(in.etas.begin(), in.etas.end(), [eta](double e) { return e != eta; })) {
        throw std::invalid_argument("fixed-step corollary needs a constant step size");
    }
    const std::size_t T = in.T();
    double s = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        s += std::exp(static_cast<double>(T - t) * eta * in.beta) * root_term(in.alphas[t - 1]);
    }
    return in.L_lip * in.L_lip * eta / static_cast<double>(in.m) * s;
}

double gap_bound_linear_decay(const BoundInputs& in, double eta) {
    in.validate();
    if (!(eta > 0.0)) {
        throw std::invalid_argument("decay corollary needs eta > 0");
    }
    const std::size_t T = in.T();
    for (std::size_t t = 1; t <= T; ++t) {
        if (in.etas[t - 1] > eta / static_cast<double>(t) * (1.0 + 1e-12)) {
            throw std::invalid_argument("decay corollary needs eta_t <= eta / t; violated at t = " +
                                        std::to_string(t));
        }
    }
    double s = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        s += root_term(in.alphas[t - 1]);
    }
    return in.L_lip * in.L_lip * eta * std::pow(static_cast<double>(T), eta * in.beta) / static_cast<double>(in.m) *
           s;
}

namespace {

double diff_ratio(const Vec64& ga, const Vec64& gb, double dist) {
    double s = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
        const double d = ga[i] - gb[i];
        s += d * d;
    }
    return std::sqrt(s) / dist;
}

}  // namespace

ConstantEstimate estimate_constants(const Model& model, const Dataset& data, const std::vector<Vec64>& trajectory,
                                    const ConstantOptions& opts) {
    if (trajectory.empty()) {
        throw std::invalid_argument("estimate_constants: empty trajectory");
    }
    if (data.train.empty()) {
        throw std::invalid_argument("estimate_constants: empty training set");
    }
    ConstantEstimate est;
    est.perturbation_only = trajectory.size() == 1;

    std::vector<std::size_t> points;
    const std::size_t P = trajectory.size();
    const std::size_t want = std::max<std::size_t>(1, std::min(opts.max_points, P));
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t idx = want == 1 ? 0 : i * (P - 1) / (want - 1);
        if (points.empty() || points.back() != idx) points.push_back(idx);
    }

    Rng rng(opts.seed);
    const auto examples = eval_sample(data.train.size(), opts.max_examples, rng.next_u64());
    const std::size_t d = model.num_params();
    const double h = opts.perturbation_scale;

    for (std::size_t pi : points) {
        const Vec64& w = trajectory[pi];
        for (const auto& ex : data.train) {
            est.raw_L = std::max(est.raw_L, norm(model.grad(w, ex)));
            ++est.gradient_samples;
        }
        for (std::size_t zi : examples) {
            const Example& ex = data.train[zi];
            const Vec64 g0 = model.grad(w, ex);
            for (std::size_t r = 0; r < opts.random_perturbations; ++r) {
                Vec64 dir(d);
                for (double& v : dir) v = rng.gaussian();
                const double n = norm(dir);
                if (n == 0.0) continue;
                for (std::size_t it = 0; it <= (r == 0 ? opts.power_iterations : 0); ++it) {
                    const double dn = norm(dir);
                    if (dn == 0.0) break;
                    Vec64 wp = w;
                    for (std::size_t j = 0; j < d; ++j) {
                        wp[j] += h * dir[j] / dn;
                    }
                    const Vec64 g1 = model.grad(wp, ex);
                    double dist = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        dist += (wp[j] - w[j]) * (wp[j] - w[j]);
                    }
                    dist = std::sqrt(dist);
                    if (dist == 0.0) break;
                    est.raw_beta = std::max(est.raw_beta, diff_ratio(g1, g0, dist));
                    ++est.smoothness_samples;
                    for (std::size_t j = 0; j < d; ++j) {
                        dir[j] = g1[j] - g0[j];
                    }
                }
            }
        }
    }
    for (std::size_t i = 1; i < P; ++i) {
        const Vec64& wa = trajectory[i - 1];
        const Vec64& wb = trajectory[i];
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dist += (wa[j] - wb[j]) * (wa[j] - wb[j]);
        }
        dist = std::sqrt(dist);
        if (dist == 0.0) continue;
        for (std::size_t zi : examples) {
            const Example& ex = data.train[zi];
            est.raw_beta = std::max(est.raw_beta, diff_ratio(model.grad(wa, ex), model.grad(wb, ex), dist));
            ++est.smoothness_samples;
        }
    }
    est.L_lip = opts.safety_factor * est.raw_L;
    est.beta = opts.safety_factor * est.raw_beta;
    return est;
}

nlohmann::json bound_report(const BoundInputs& in, const ConstantEstimate* est, bool strided) {
    nlohmann::json j;
    const auto terms = gap_bound_terms(in);
    double total = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& t : terms) {
        total += t.value;
        rows.push_back({{"t", t.t}, {"eta", t.eta}, {"alpha", t.alpha}, {"expansion", t.expansion}, {"value", t.value}});
    }
    j["value"] = total;
    j["m"] = in.m;
    j["T"] = in.T();
    j["L"] = in.L_lip;
    j["beta"] = in.beta;
    j["qualitative"] = true;
    j["alpha_piecewise_constant_fill"] = strided;
    try {
        j["fixed_eta"] = gap_bound_fixed_eta(in);
    } catch (const std::invalid_argument&) {
        j["fixed_eta"] = nullptr;
    }
    if (in.T() > 0) {
        double eta = 0.0;
        for (std::size_t t = 1; t <= in.T(); ++t) {
            eta = std::max(eta, in.etas[t - 1] * static_cast<double>(t));
        }
        j["linear_decay"] = eta > 0.0 ? nlohmann::json(gap_bound_linear_decay(in, eta)) : nlohmann::json(nullptr);
        j["linear_decay_eta"] = eta;
    }
    j["terms"] = rows;
    if (est != nullptr) {
        j["constants"] = {{"L", est->L_lip},
                          {"beta", est->beta},
                          {"raw_L", est->raw_L},
                          {"raw_beta", est->raw_beta},
                          {"gradient_samples", est->gradient_samples},
                          {"smoothness_samples", est->smoothness_samples},
                          {"perturbation_only", est->perturbation_only}};
    }
    return j;
}

}  // namespace cohgrad
