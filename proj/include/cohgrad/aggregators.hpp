#pragma once

// Rules for combining a stack of gradients (one per row) into one update.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cohgrad/numkit.hpp"

namespace cohgrad {

enum class AggKind { mean, winsorized, median_of_means, m3 };

struct Aggregator {
    AggKind kind = AggKind::mean;
    /// Winsorization percentile, 0 <= c <= 50.
    double c = 0.0;
    /// Group count for median_of_means.
    std::size_t k_groups = 1;

    static Aggregator mean() { return {}; }
    static Aggregator winsorized(double c) { return {AggKind::winsorized, c, 1}; }
    static Aggregator median_of_means(std::size_t k) { return {AggKind::median_of_means, 0.0, k}; }
    static Aggregator m3() { return {AggKind::m3, 0.0, 1}; }

    /// Throws ContractViolation for c outside [0, 50] or k_groups == 0.
    void validate() const;

    /// "mean", "winsorized:<c>", "median_of_means:<k>" or "m3".
    std::string spec() const;
};

/// Inverse of Aggregator::spec. Throws std::invalid_argument on bad input.
Aggregator parse_aggregator(std::string_view text);

/// Combines the rows of `grads`. m3 needs exactly three rows (the micro-batch
/// means). Empty input throws.
Vec64 aggregate(const Aggregator& agg, const Mat64& grads);

/// Per column, clip to [percentile(c), percentile(100 - c)] then average.
/// c = 0 reproduces column_means bit for bit; c = 50 returns the column median.
Vec64 winsorized_mean(const Mat64& grads, double c);

/// Coordinate-wise median (percentile 50, so even counts take the midpoint).
Vec64 coordinate_median(const Mat64& grads);

/// Rows are split into k contiguous groups in row order (sizes differ by at
/// most one), each group is averaged, and the coordinate-wise median of the k
/// means is returned.
Vec64 median_of_means(const Mat64& grads, std::size_t k);

/// Buffers micro-batch means and emits their coordinate-wise median on every
/// third push.
class M3Stream {
public:
    std::optional<Vec64> push(std::span<const double> micro_mean);
    std::size_t pending() const { return buffer_.size(); }
    void reset() { buffer_.clear(); }

private:
    std::vector<Vec64> buffer_;
};

}  // namespace cohgrad
