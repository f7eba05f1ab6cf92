#include "cohgrad/aggregators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "cohgrad/io.hpp"

namespace cohgrad {

void Aggregator::validate() const {
    if (kind == AggKind::winsorized && !(c >= 0.0 && c <= 50.0)) {
        throw ContractViolation("winsorization percentile must lie in [0, 50]");
    }
    if (kind == AggKind::median_of_means && k_groups == 0) {
        throw ContractViolation("median_of_means needs at least one group");
    }
}

std::string Aggregator::spec() const {
    switch (kind) {
        case AggKind::mean: return "mean";
        case AggKind::winsorized: return "winsorized:" + format_double(c);
        case AggKind::median_of_means: return "median_of_means:" + std::to_string(k_groups);
        case AggKind::m3: return "m3";
    }
    return "?";
}

Aggregator parse_aggregator(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    auto bad = [&] { return std::invalid_argument("bad aggregator '" + std::string(text) + "'"); };

    Aggregator agg;
    if (head == "mean" && arg.empty()) {
        agg = Aggregator::mean();
    } else if (head == "m3" && arg.empty()) {
        agg = Aggregator::m3();
    } else if (head == "winsorized" && !arg.empty()) {
        try {
            agg = Aggregator::winsorized(parse_double(arg));
        } catch (const std::runtime_error&) {
            throw bad();
        }
    } else if (head == "median_of_means" && !arg.empty()) {
        std::size_t k = 0;
        const auto res = std::from_chars(arg.data(), arg.data() + arg.size(), k);
        if (res.ec != std::errc() || res.ptr != arg.data() + arg.size()) {
            throw bad();
        }
        agg = Aggregator::median_of_means(k);
    } else {
        throw bad();
    }
    try {
        agg.validate();
    } catch (const ContractViolation& e) {
        throw std::invalid_argument(e.what());
    }
    return agg;
}

namespace {

// percentile_sorted() of a column, sorting only its nonzero entries; zeros
// are common under sparse inputs. `nz` is scratch space.
struct ColumnRanks {
    Vec64 nz;
    std::size_t n = 0;
    std::size_t zeros = 0;
    std::size_t negatives = 0;

    void load(const double* col, std::size_t m) {
        nz.clear();
        for (std::size_t i = 0; i < m; ++i) {
            if (col[i] != 0.0) nz.push_back(col[i]);
        }
        std::sort(nz.begin(), nz.end());
        n = m;
        zeros = m - nz.size();
        negatives = static_cast<std::size_t>(std::lower_bound(nz.begin(), nz.end(), 0.0) - nz.begin());
    }
    double at(std::size_t r) const {
        if (r < negatives) return nz[r];
        if (r < negatives + zeros) return 0.0;
        return nz[r - zeros];
    }
    double percentile(double p) const {
        const double h = (p / 100.0) * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        if (lo + 1 >= n) return at(n - 1);
        const double frac = h - static_cast<double>(lo);
        if (frac == 0.0) return at(lo);
        return at(lo) + frac * (at(lo + 1) - at(lo));
    }
};

}  // namespace

Vec64 winsorized_mean(const Mat64& grads, double c) {
    if (grads.empty()) {
        throw std::invalid_argument("winsorized_mean: no gradients");
    }
    if (!(c >= 0.0 && c <= 50.0)) {
        throw ContractViolation("winsorization percentile must lie in [0, 50]");
    }
    const std::size_t m = grads.rows();
    const std::size_t d = grads.cols();
    const double inv = 1.0 / static_cast<double>(m);
    Vec64 out(d, 0.0);
    if (c == 0.0) {
        // Clipping at the extremes is a no-op.
        return column_means(grads);
    }
    // Tiled transpose so each column is contiguous.
    constexpr std::size_t kTile = 32;
    thread_local Vec64 cols;
    cols.resize(m * d);
    for (std::size_t i0 = 0; i0 < m; i0 += kTile) {
        const std::size_t i1 = std::min(m, i0 + kTile);
        for (std::size_t j0 = 0; j0 < d; j0 += kTile) {
            const std::size_t j1 = std::min(d, j0 + kTile);
            for (std::size_t i = i0; i < i1; ++i) {
                const double* row = grads.row(i).data();
                for (std::size_t j = j0; j < j1; ++j) cols[j * m + i] = row[j];
            }
        }
    }
    thread_local ColumnRanks ranks;
    for (std::size_t j = 0; j < d; ++j) {
        const double* col = cols.data() + j * m;
        ranks.load(col, m);
        const double lo = ranks.percentile(c);
        const double hi = ranks.percentile(100.0 - c);
        if (lo == hi) {
            out[j] = lo;
            continue;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += std::min(std::max(col[i], lo), hi);
        out[j] = s * inv;
    }
    return out;
}

Vec64 coordinate_median(const Mat64& grads) {
    if (grads.empty()) {
        throw std::invalid_argument("coordinate_median: no gradients");
    }
    Vec64 out(grads.cols());
    for (std::size_t j = 0; j < grads.cols(); ++j) {
        out[j] = percentile(grads.column(j), 50.0);
    }
    return out;
}

Vec64 median_of_means(const Mat64& grads, std::size_t k) {
    if (grads.empty()) {
        throw std::invalid_argument("median_of_means: no gradients");
    }
    if (k == 0 || k > grads.rows()) {
        throw ContractViolation("median_of_means: need 1 <= k <= rows");
    }
    const std::size_t m = grads.rows();
    Mat64 means(k, grads.cols());
    for (std::size_t g = 0; g < k; ++g) {
        const std::size_t first = g * m / k;
        const std::size_t last = (g + 1) * m / k;
        const Vec64 mu = column_means(grads.slice_rows(first, last - first));
        std::copy(mu.begin(), mu.end(), means.row(g).begin());
    }
    return coordinate_median(means);
}

Vec64 aggregate(const Aggregator& agg, const Mat64& grads) {
    agg.validate();
    if (grads.empty()) {
        throw std::invalid_argument("aggregate: no gradients");
    }
    switch (agg.kind) {
        case AggKind::mean: return column_means(grads);
        case AggKind::winsorized: return winsorized_mean(grads, agg.c);
        case AggKind::median_of_means: return median_of_means(grads, agg.k_groups);
        case AggKind::m3:
            if (grads.rows() != 3) {
                throw ContractViolation("m3 needs exactly 3 micro-batch means, got " + std::to_string(grads.rows()));
            }
            return median3(grads.row(0), grads.row(1), grads.row(2));
    }
    throw std::logic_error("unknown aggregator");
}

std::optional<Vec64> M3Stream::push(std::span<const double> micro_mean) {
    if (!buffer_.empty() && buffer_.front().size() != micro_mean.size()) {
        throw ContractViolation("M3Stream: dimension mismatch");
    }
    buffer_.emplace_back(micro_mean.begin(), micro_mean.end());
    if (buffer_.size() < 3) {
        return std::nullopt;
    }
    Vec64 out = median3(buffer_[0], buffer_[1], buffer_[2]);
    buffer_.clear();
    return out;
}

}  // namespace cohgrad
