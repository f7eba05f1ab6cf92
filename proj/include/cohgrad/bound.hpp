#pragma once

// Stability-based generalization bound evaluated over a recorded trajectory:
//
//   (L^2 / m) * sum_{t=1..T} prod_{k=t+1..T} (1 + eta_k beta) * eta_t * sqrt(2 (1 - alpha_{t-1}))
//
// plus its fixed-step and 1/t-decay relaxations, and empirical estimates of
// the Lipschitz constants L (gradient norm) and beta (smoothness).

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "cohgrad/datasets.hpp"
#include "cohgrad/models.hpp"
#include "cohgrad/trainer.hpp"

namespace cohgrad {

struct BoundInputs {
    std::size_t m = 1;
    /// eta_t for t = 1..T (index t - 1).
    Vec64 etas;
    /// alpha(w_{t-1}) for t = 1..T (index t - 1).
    Vec64 alphas;
    double L_lip = 0.0;
    double beta = 0.0;

    std::size_t T() const { return etas.size(); }
    /// Throws std::invalid_argument on mismatched lengths, alpha outside
    /// [0, 1], negative constants or m == 0.
    void validate() const;
};

/// Trajectory of a run as bound inputs.
BoundInputs bound_inputs_from_log(const RunLog& log, double L_lip, double beta);

/// prod_{k=t+1..T} (1 + eta_k beta), t 1-based; 1 when t == T.
double expansion(std::size_t t, const BoundInputs& in);

struct BoundTerm {
    std::size_t t = 0;
    double eta = 0.0;
    double alpha = 0.0;
    double expansion = 1.0;
    /// Contribution to the bound, already scaled by L^2 / m.
    double value = 0.0;
};

std::vector<BoundTerm> gap_bound_terms(const BoundInputs& in);
double gap_bound(const BoundInputs& in);

/// Needs every eta_t equal; throws std::invalid_argument otherwise.
double gap_bound_fixed_eta(const BoundInputs& in);
/// Needs eta_t <= eta / t for all t; throws std::invalid_argument otherwise.
double gap_bound_linear_decay(const BoundInputs& in, double eta);

struct ConstantOptions {
    /// Trajectory points used (evenly spaced, endpoints included).
    std::size_t max_points = 20;
    /// Examples used per point for the smoothness probes.
    std::size_t max_examples = 50;
    std::size_t power_iterations = 30;
    std::size_t random_perturbations = 4;
    double perturbation_scale = 1e-3;
    double safety_factor = 1.1;
    std::uint64_t seed = 0;
};

struct ConstantEstimate {
    double L_lip = 0.0;
    double beta = 0.0;
    double raw_L = 0.0;
    double raw_beta = 0.0;
    std::size_t gradient_samples = 0;
    std::size_t smoothness_samples = 0;
    /// True when the trajectory had a single point, so no consecutive pairs
    /// contributed.
    bool perturbation_only = false;
};

/// L: largest per-example gradient norm over the sampled trajectory points.
/// beta: largest |g(w, z) - g(w', z)| / |w - w'| over w' = w + perturbation
/// (random directions, refined by power iteration on the finite-difference
/// Hessian-vector product) and over consecutive trajectory points. Both are
/// multiplied by the safety factor.
ConstantEstimate estimate_constants(const Model& model, const Dataset& data, const std::vector<Vec64>& trajectory,
                                    const ConstantOptions& opts = {});

/// Report with value, corollaries where applicable, per-term breakdown and
/// the constants' estimation metadata.
nlohmann::json bound_report(const BoundInputs& in, const ConstantEstimate* est, bool strided);

}  // namespace cohgrad
