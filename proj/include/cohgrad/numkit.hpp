#pragma once

// Deterministic numeric kernels shared by every other module: dense vectors and
// row-major matrices of doubles, a seeded generator, and order statistics.
//
// All reductions run in a fixed left-to-right order so that results are
// bit-reproducible for a given input.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace cohgrad {

using Vec64 = std::vector<double>;

/// Row-major dense matrix. Used mostly as a stack of per-example gradients,
/// one example per row.
class Mat64 {
public:
    Mat64() = default;
    Mat64(std::size_t rows, std::size_t cols, double fill = 0.0);
    Mat64(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat64 from_rows(const std::vector<Vec64>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }

    /// New shape over the existing storage; contents are unspecified.
    void reshape(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.resize(rows * cols);
    }

    /// Copy of column j (strided gather).
    Vec64 column(std::size_t j) const;

    /// Rows [first, first + count) as a new matrix.
    Mat64 slice_rows(std::size_t first, std::size_t count) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Thrown when a caller breaks an operation's precondition (length mismatch,
/// out-of-range argument). Distinct from data-dependent failures.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);

/// out += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> out);

/// Column means of a matrix, rows summed in order.
Vec64 column_means(const Mat64& m);

bool all_finite(std::span<const double> a);

/// Linear-interpolation percentile between closest ranks (inclusive form):
/// with the values sorted ascending as v[0..n-1], the rank is
/// h = (p / 100) * (n - 1) and the result is
/// v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)]).
/// percentile(values, 50) is the usual median; p = 0 and 100 give min and max.
double percentile(std::span<const double> values, double p);

/// Same rule applied to an already ascending-sorted sequence.
double percentile_sorted(std::span<const double> sorted, double p);

/// Coordinate-wise median of three vectors.
Vec64 median3(std::span<const double> a, std::span<const double> b, std::span<const double> c);

/// Scalar median of three, exact (no rounding).
inline double median3(double a, double b, double c) {
    const double lo = a < b ? a : b;
    const double hi = a < b ? b : a;
    const double m = hi < c ? hi : c;
    return lo < m ? m : lo;
}

/// The repo-wide pseudo-random generator: MT19937-64 with explicitly defined
/// derived distributions so that a seed yields the same stream everywhere.
///
///  - uniform():   top 53 bits of one 64-bit draw, scaled by 2^-53, in [0, 1).
///  - below(n):    rejection sampling on the top bits, unbiased in [0, n).
///  - gaussian():  Box-Muller on two uniforms, u1 mapped to (0, 1]; both
///                 outputs of a pair are used, the second cached.
///  - shuffle():   Fisher-Yates from the back using below().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t n);
    double gaussian();
    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Identity permutation of size n, shuffled.
    std::vector<std::size_t> permutation(std::size_t n);

    /// Independent child generator; deterministic in (this stream, tag).
    Rng fork(std::uint64_t tag);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cohgrad
