#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cohgrad/numkit.hpp"

using namespace cohgrad;

namespace {

// Sort-and-interpolate, written independently of the library routine.
double ref_percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST(Dot, TableRows) {
    EXPECT_EQ(dot(Vec64{1, 0, 0, 0, 0, 1}, Vec64{0, -1, 0, 0, 0, -1}), -1.0);
    EXPECT_EQ(dot(Vec64{0, 0, 0}, Vec64{0, 0, 0}), 0.0);
    EXPECT_EQ(dot(Vec64{1, 2}, Vec64{3, 4}), 11.0);
}

TEST(Dot, LengthMismatchThrows) { EXPECT_THROW(dot(Vec64{1, 2}, Vec64{1}), ContractViolation); }

TEST(Dot, SymmetricAndBilinear) {
    Rng rng(11);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + rng.below(8);
        Vec64 a(n), b(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.gaussian();
            b[i] = rng.gaussian();
            c[i] = rng.gaussian();
        }
        const double s = rng.uniform(-3, 3);
        EXPECT_EQ(dot(a, b), dot(b, a));
        Vec64 sa_c(n);
        for (std::size_t i = 0; i < n; ++i) sa_c[i] = s * a[i] + c[i];
        EXPECT_NEAR(dot(sa_c, b), s * dot(a, b) + dot(c, b), 1e-10);
    }
}

TEST(Percentile, Examples) {
    EXPECT_EQ(percentile(Vec64{0.7, 0, 0, 0}, 50), 0.0);
    EXPECT_EQ(percentile(Vec64{5}, 50), 5.0);
    EXPECT_EQ(percentile(Vec64{1, 2, 3, 4}, 50), 2.5);
    EXPECT_EQ(percentile(Vec64{4, 1, 3, 2}, 50), ref_percentile({1, 2, 3, 4}, 50));
}

TEST(Percentile, EmptyThrows) { EXPECT_THROW(percentile(Vec64{}, 50), std::invalid_argument); }

TEST(Percentile, MatchesOracleAndIsMonotone) {
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        Vec64 v(n);
        for (double& x : v) x = rng.below(4) == 0 ? 0.0 : rng.gaussian();
        EXPECT_EQ(percentile(v, 0), *std::min_element(v.begin(), v.end()));
        EXPECT_EQ(percentile(v, 100), *std::max_element(v.begin(), v.end()));
        double prev = -INFINITY;
        for (double p = 0; p <= 100; p += 2.5) {
            const double q = percentile(v, p);
            EXPECT_DOUBLE_EQ(q, ref_percentile(v, p));
            EXPECT_GE(q, prev);
            prev = q;
        }
    }
}

TEST(Median3, Examples) {
    EXPECT_EQ(median3(Vec64{1, 0}, Vec64{0, 1}, Vec64{0, 0}), (Vec64{0, 0}));
    EXPECT_EQ(median3(Vec64{2, -1}, Vec64{2, -1}, Vec64{2, -1}), (Vec64{2, -1}));
    EXPECT_EQ(median3(Vec64{1}, Vec64{2}, Vec64{3}), (Vec64{2}));
    EXPECT_THROW(median3(Vec64{1}, Vec64{2, 3}, Vec64{3}), ContractViolation);
}

TEST(Median3, EqualsSortBasedMedian) {
    Rng rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        double v[3];
        for (double& x : v) x = rng.below(3) == 0 ? static_cast<double>(rng.below(3)) : rng.gaussian();
        double s[3] = {v[0], v[1], v[2]};
        std::sort(s, s + 3);
        EXPECT_EQ(median3(v[0], v[1], v[2]), s[1]);
    }
}

TEST(Median3, SumMinMaxIdentityOnIntegers) {
    Rng rng(8);
    for (int trial = 0; trial < 10000; ++trial) {
        const double a = static_cast<double>(rng.below(2001)) - 1000;
        const double b = static_cast<double>(rng.below(2001)) - 1000;
        const double c = static_cast<double>(rng.below(2001)) - 1000;
        EXPECT_EQ(median3(a, b, c), a + b + c - std::min({a, b, c}) - std::max({a, b, c}));
    }
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 10000; ++i) ASSERT_EQ(c.gaussian(), d.gaussian());
}

TEST(Rng, UniformAndBelowRanges) {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.below(7), 7u);
    }
}

TEST(Rng, PermutationIsPermutation) {
    Rng r(2);
    const auto p = r.permutation(100);
    std::set<std::size_t> s(p.begin(), p.end());
    EXPECT_EQ(s.size(), 100u);
    EXPECT_EQ(*s.rbegin(), 99u);
}

TEST(Rng, GaussianMoments) {
    Rng r(9);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = r.gaussian();
        s += g;
        s2 += g * g;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Mat64, ColumnMeansAndSlices) {
    Mat64 m(3, 2, Vec64{1, 2, 3, 4, 5, 9});
    EXPECT_EQ(column_means(m), (Vec64{3, 5}));
    EXPECT_EQ(m.column(1), (Vec64{2, 4, 9}));
    const Mat64 s = m.slice_rows(1, 2);
    EXPECT_EQ(s.rows(), 2u);
    EXPECT_EQ(s(0, 0), 3.0);
}

TEST(Axpy, Accumulates) {
    Vec64 out{1, 1};
    axpy(2.0, Vec64{1, -1}, out);
    EXPECT_EQ(out, (Vec64{3, -1}));
    EXPECT_TRUE(all_finite(out));
    out[0] = NAN;
    EXPECT_FALSE(all_finite(out));
}
