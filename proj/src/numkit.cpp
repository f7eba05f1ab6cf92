#include "cohgrad/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace cohgrad {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ContractViolation(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Mat64::Mat64(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat64::Mat64(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ContractViolation("Mat64: rows * cols != data length");
    }
}

Mat64 Mat64::from_rows(const std::vector<Vec64>& rows) {
    if (rows.empty()) {
        return {};
    }
    const std::size_t cols = rows.front().size();
    Mat64 m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require_same_length(rows[i].size(), cols, "Mat64::from_rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

Vec64 Mat64::column(std::size_t j) const {
    Vec64 out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        out[i] = data_[i * cols_ + j];
    }
    return out;
}

Mat64 Mat64::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) {
        throw ContractViolation("Mat64::slice_rows: range out of bounds");
    }
    const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols_);
    return Mat64(count, cols_, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * cols_)));
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

void axpy(double scale, std::span<const double> x, std::span<double> out) {
    require_same_length(x.size(), out.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] += scale * x[i];
    }
}

Vec64 column_means(const Mat64& m) {
    Vec64 out(m.cols(), 0.0);
    if (m.rows() == 0) {
        return out;
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += r[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(m.rows());
    for (double& v : out) {
        v *= inv;
    }
    return out;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw std::invalid_argument("percentile: empty sequence");
    }
    if (!(p >= 0.0 && p <= 100.0)) {
        throw ContractViolation("percentile: p must lie in [0, 100]");
    }
    const double h = (p / 100.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) {
        return sorted[lo];
    }
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double percentile(std::span<const double> values, double p) {
    Vec64 sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, p);
}

Vec64 median3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    require_same_length(a.size(), b.size(), "median3");
    require_same_length(a.size(), c.size(), "median3");
    Vec64 out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = median3(a[i], b[i], c[i]);
    }
    return out;
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw ContractViolation("Rng::below: n must be positive");
    }
    // Reject draws from the incomplete top bucket.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    shuffle(idx);
    return idx;
}

Rng Rng::fork(std::uint64_t tag) {
    return Rng(splitmix64(engine_() ^ splitmix64(tag)));
}

}  // namespace cohgrad
