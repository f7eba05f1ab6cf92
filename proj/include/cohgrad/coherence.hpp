#pragma once

// Gradient coherence: alpha = |E[g]|^2 / E[g . g] over a sample of per-example
// gradients, its scaled form alpha_hat = m * alpha, the per-segment
// decomposition, the mini-batch forward/inverse formulas, and the comparison
// metrics (stiffness, GSNR, gradient diversity).

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cohgrad/models.hpp"
#include "cohgrad/numkit.hpp"

namespace cohgrad {

/// Added to the denominator so an all-zero sample yields alpha = 0.
inline constexpr double kAlphaEpsilon = 1e-30;

/// Running sums from which alpha derives. Merging is a field-wise sum.
struct CoherenceStats {
    std::size_t m = 0;
    Vec64 sum_g;
    double sum_sq = 0.0;
    std::vector<Segment> segments;
    /// Sum of squared norms restricted to each segment.
    Vec64 seg_sum_sq;

    CoherenceStats() = default;
    explicit CoherenceStats(std::size_t dim, std::vector<Segment> segs = {});

    static CoherenceStats from(const Mat64& grads, std::vector<Segment> segs = {});

    void add(std::span<const double> g);
    CoherenceStats& merge(const CoherenceStats& other);
};

struct SegmentCoherence {
    std::string name;
    double fraction = 0.0;
    double alpha = 0.0;
    double alpha_hat = 0.0;
};

struct CoherenceReport {
    double alpha = 0.0;
    double alpha_hat = 0.0;
    std::size_t m = 0;
    double orthogonal_limit = 0.0;
    std::vector<SegmentCoherence> per_segment;
};

/// Throws std::invalid_argument when m == 0. Segment fractions are the share of
/// the total squared norm in each segment (uniform if the total is zero).
CoherenceReport alpha(const CoherenceStats& stats);
CoherenceReport alpha(const Mat64& grads, std::vector<Segment> segs = {});

void to_json(nlohmann::json& j, const SegmentCoherence& s);
void to_json(nlohmann::json& j, const CoherenceReport& r);

/// alpha of the mean of k i.i.d. draws: k a / (1 + (k - 1) a).
double batch_alpha_forward(double alpha_v, std::size_t k);

struct ImputedAlpha {
    double alpha = 0.0;
    double alpha_batch = 0.0;
    /// The raw inverse fell outside [0, 1] and was clamped.
    bool clamped = false;
    /// Denominator k - (k - 1) alpha_batch was not positive; alpha set to 1.
    bool saturated = false;
};

/// Inverse of batch_alpha_forward: a / (k - (k - 1) a).
ImputedAlpha impute_alpha(double alpha_batch, std::size_t k);
/// Same inverse with a non-integer batch size.
ImputedAlpha impute_alpha_effective(double alpha_batch, double k);
/// Same, from stats accumulated over mini-batch mean gradients.
ImputedAlpha impute_alpha(const CoherenceStats& batch_stats, std::size_t k);

/// E[g] . E[g]
double pairwise_dot_expectation(const Mat64& grads);
/// -eta E[g . g]
double idealized_reduction(const Mat64& grads, double eta);

struct Stiffness {
    double value = 0.0;
    /// Zero rows left out of the cosine average.
    std::size_t excluded = 0;
};

/// Mean of sign(g_z . g_z') over ordered pairs z != z', with sign(0) = 0.
Stiffness sign_stiffness(const Mat64& grads);
/// Mean cosine over ordered pairs of nonzero rows z != z'.
Stiffness cos_stiffness(const Mat64& grads);

/// Per-coordinate mean^2 / variance (population variance). Constant
/// coordinates give +inf, or 0 when the constant is zero.
Vec64 gsnr(const Mat64& grads);

/// 1 / alpha; throws std::domain_error when alpha is 0.
double gradient_diversity(const Mat64& grads);

struct DiffBound {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// lhs: mean of |g_z - g_z'| over all m^2 ordered pairs (self pairs
/// included); rhs: sqrt(2 (1 - alpha) E[g . g]).
DiffBound diff_bound_check(const Mat64& grads);

/// alpha of m gradients that share a common component c and have mutually
/// orthogonal idiosyncratic parts of equal norm |u|.
double commonality_alpha(std::size_t m, double c_norm_sq, double u_norm_sq);

}  // namespace cohgrad
