#include "cohgrad/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cohgrad {

namespace {

void require_rows(const Mat64& grads, std::size_t min_rows, const char* what) {
    if (grads.rows() < min_rows) {
        throw ContractViolation(std::string(what) + ": need at least " + std::to_string(min_rows) + " rows");
    }
}

double ratio(double sum_g_sq, double sum_sq, double m) {
    return (sum_g_sq / (m * m)) / (sum_sq / m + kAlphaEpsilon);
}

}  // namespace

CoherenceStats::CoherenceStats(std::size_t dim, std::vector<Segment> segs)
    : sum_g(dim, 0.0), segments(std::move(segs)), seg_sum_sq(segments.size(), 0.0) {
    std::size_t next = 0;
    for (const auto& s : segments) {
        if (s.offset != next) {
            throw ContractViolation("segments must tile the parameter vector in order");
        }
        next += s.length;
    }
    if (!segments.empty() && next != dim) {
        throw ContractViolation("segments do not cover the parameter vector");
    }
}

CoherenceStats CoherenceStats::from(const Mat64& grads, std::vector<Segment> segs) {
    CoherenceStats s(grads.cols(), std::move(segs));
    for (std::size_t i = 0; i < grads.rows(); ++i) {
        s.add(grads.row(i));
    }
    return s;
}

void CoherenceStats::add(std::span<const double> g) {
    if (g.size() != sum_g.size()) {
        throw ContractViolation("CoherenceStats::add: dimension mismatch");
    }
    for (std::size_t j = 0; j < g.size(); ++j) {
        sum_g[j] += g[j];
    }
    sum_sq += squared_norm(g);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        seg_sum_sq[i] += squared_norm(g.subspan(segments[i].offset, segments[i].length));
    }
    ++m;
}

CoherenceStats& CoherenceStats::merge(const CoherenceStats& other) {
    if (other.sum_g.size() != sum_g.size() || other.segments.size() != segments.size()) {
        throw ContractViolation("CoherenceStats::merge: shape mismatch");
    }
    m += other.m;
    for (std::size_t j = 0; j < sum_g.size(); ++j) {
        sum_g[j] += other.sum_g[j];
    }
    sum_sq += other.sum_sq;
    for (std::size_t i = 0; i < seg_sum_sq.size(); ++i) {
        seg_sum_sq[i] += other.seg_sum_sq[i];
    }
    return *this;
}

CoherenceReport alpha(const CoherenceStats& stats) {
    if (stats.m == 0) {
        throw std::invalid_argument("alpha: empty sample");
    }
    const double m = static_cast<double>(stats.m);
    CoherenceReport r;
    r.m = stats.m;
    r.orthogonal_limit = 1.0 / m;
    r.alpha = ratio(squared_norm(stats.sum_g), stats.sum_sq, m);
    r.alpha_hat = m * r.alpha;

    const std::size_t k = stats.segments.size();
    for (std::size_t i = 0; i < k; ++i) {
        const Segment& seg = stats.segments[i];
        const auto part = std::span<const double>(stats.sum_g).subspan(seg.offset, seg.length);
        SegmentCoherence sc;
        sc.name = seg.name;
        sc.fraction = stats.sum_sq > 0.0 ? stats.seg_sum_sq[i] / stats.sum_sq : 1.0 / static_cast<double>(k);
        sc.alpha = ratio(squared_norm(part), stats.seg_sum_sq[i], m);
        sc.alpha_hat = m * sc.alpha;
        r.per_segment.push_back(std::move(sc));
    }
    return r;
}

CoherenceReport alpha(const Mat64& grads, std::vector<Segment> segs) {
    return alpha(CoherenceStats::from(grads, std::move(segs)));
}

void to_json(nlohmann::json& j, const SegmentCoherence& s) {
    j = nlohmann::json{{"name", s.name}, {"fraction", s.fraction}, {"alpha", s.alpha}, {"alpha_hat", s.alpha_hat}};
}

void to_json(nlohmann::json& j, const CoherenceReport& r) {
    j = nlohmann::json{{"alpha", r.alpha},
                       {"alpha_hat", r.alpha_hat},
                       {"m", r.m},
                       {"orthogonal_limit", r.orthogonal_limit},
                       {"segments", r.per_segment}};
}

double batch_alpha_forward(double alpha_v, std::size_t k) {
    if (!(alpha_v >= 0.0 && alpha_v <= 1.0)) {
        throw ContractViolation("batch_alpha_forward: alpha must lie in [0, 1]");
    }
    if (k == 0) {
        throw ContractViolation("batch_alpha_forward: k must be at least 1");
    }
    const double kd = static_cast<double>(k);
    return kd * alpha_v / (1.0 + (kd - 1.0) * alpha_v);
}

ImputedAlpha impute_alpha(double alpha_batch, std::size_t k) {
    if (k == 0) {
        throw ContractViolation("impute_alpha: k must be at least 1");
    }
    return impute_alpha_effective(alpha_batch, static_cast<double>(k));
}

ImputedAlpha impute_alpha_effective(double alpha_batch, double kd) {
    if (!(kd >= 1.0)) {
        throw ContractViolation("impute_alpha_effective: k must be at least 1");
    }
    ImputedAlpha out;
    out.alpha_batch = alpha_batch;
    const double denom = kd - (kd - 1.0) * alpha_batch;
    if (!(denom > 0.0)) {
        out.alpha = 1.0;
        out.saturated = true;
        return out;
    }
    const double raw = alpha_batch / denom;
    out.alpha = std::clamp(raw, 0.0, 1.0);
    out.clamped = out.alpha != raw;
    return out;
}

ImputedAlpha impute_alpha(const CoherenceStats& batch_stats, std::size_t k) {
    return impute_alpha(alpha(batch_stats).alpha, k);
}

double pairwise_dot_expectation(const Mat64& grads) {
    require_rows(grads, 1, "pairwise_dot_expectation");
    const Vec64 mean = column_means(grads);
    return dot(mean, mean);
}

double idealized_reduction(const Mat64& grads, double eta) {
    require_rows(grads, 1, "idealized_reduction");
    if (!(eta > 0.0)) {
        throw ContractViolation("idealized_reduction: eta must be positive");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < grads.rows(); ++i) {
        s += squared_norm(grads.row(i));
    }
    return -eta * s / static_cast<double>(grads.rows());
}

Stiffness sign_stiffness(const Mat64& grads) {
    require_rows(grads, 2, "sign_stiffness");
    const std::size_t m = grads.rows();
    bool any_nonzero = false;
    for (std::size_t i = 0; i < m && !any_nonzero; ++i) {
        any_nonzero = squared_norm(grads.row(i)) > 0.0;
    }
    if (!any_nonzero) {
        throw std::invalid_argument("sign_stiffness: all gradients are zero");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const double d = dot(grads.row(i), grads.row(j));
            s += d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        }
    }
    return {s / static_cast<double>(m * (m - 1)), 0};
}

Stiffness cos_stiffness(const Mat64& grads) {
    require_rows(grads, 2, "cos_stiffness");
    std::vector<std::size_t> keep;
    Vec64 norms;
    for (std::size_t i = 0; i < grads.rows(); ++i) {
        const double n = norm(grads.row(i));
        if (n > 0.0) {
            keep.push_back(i);
            norms.push_back(n);
        }
    }
    if (keep.empty()) {
        throw std::invalid_argument("cos_stiffness: all gradients are zero");
    }
    Stiffness out;
    out.excluded = grads.rows() - keep.size();
    const std::size_t n = keep.size();
    if (n < 2) {
        throw std::invalid_argument("cos_stiffness: fewer than two nonzero gradients");
    }
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            s += dot(grads.row(keep[a]), grads.row(keep[b])) / (norms[a] * norms[b]);
        }
    }
    out.value = s / static_cast<double>(n * (n - 1));
    return out;
}

Vec64 gsnr(const Mat64& grads) {
    require_rows(grads, 2, "gsnr");
    const std::size_t m = grads.rows();
    const Vec64 mean = column_means(grads);
    Vec64 out(grads.cols());
    for (std::size_t j = 0; j < grads.cols(); ++j) {
        bool constant = true;
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = grads(i, j);
            constant = constant && v == grads(0, j);
            var += (v - mean[j]) * (v - mean[j]);
        }
        var /= static_cast<double>(m);
        if (constant) {
            out[j] = grads(0, j) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            out[j] = mean[j] * mean[j] / var;
        }
    }
    return out;
}

double gradient_diversity(const Mat64& grads) {
    const double a = alpha(grads).alpha;
    if (a == 0.0) {
        throw std::domain_error("gradient_diversity: alpha is zero");
    }
    return 1.0 / a;
}

DiffBound diff_bound_check(const Mat64& grads) {
    require_rows(grads, 1, "diff_bound_check");
    const std::size_t m = grads.rows();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto gi = grads.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const auto gj = grads.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < gi.size(); ++k) {
                const double d = gi[k] - gj[k];
                s += d * d;
            }
            total += std::sqrt(s);
        }
    }
    const double md = static_cast<double>(m);
    const CoherenceStats stats = CoherenceStats::from(grads);
    const double a = alpha(stats).alpha;
    DiffBound out;
    out.lhs = total / (md * md);
    out.rhs = std::sqrt(2.0 * std::max(0.0, 1.0 - a) * stats.sum_sq / md);
    return out;
}

double commonality_alpha(std::size_t m, double c_norm_sq, double u_norm_sq) {
    if (m == 0) {
        throw ContractViolation("commonality_alpha: m must be positive");
    }
    if (!(c_norm_sq >= 0.0 && u_norm_sq >= 0.0)) {
        throw ContractViolation("commonality_alpha: squared norms must be non-negative");
    }
    if (c_norm_sq == 0.0 && u_norm_sq == 0.0) {
        throw std::invalid_argument("commonality_alpha: both components are zero");
    }
    const double md = static_cast<double>(m);
    const double f = c_norm_sq / (c_norm_sq + u_norm_sq);
    return (1.0 + (md - 1.0) * f) / md;
}

}  // namespace cohgrad
