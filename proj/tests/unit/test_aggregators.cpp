#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cohgrad/aggregators.hpp"
#include "cohgrad/models.hpp"

using namespace cohgrad;

namespace {

Mat64 random_stack(Rng& r, std::size_t m, std::size_t d) {
    Mat64 g(m, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const auto k = r.below(6);
            g(i, j) = k == 0 ? 0.0 : (k == 1 ? static_cast<double>(r.below(3)) - 1.0 : r.gaussian());
        }
    return g;
}

// Clip-then-average with a full sort per column.
Vec64 ref_winsorized(const Mat64& g, double c) {
    Vec64 out(g.cols());
    for (std::size_t j = 0; j < g.cols(); ++j) {
        Vec64 col = g.column(j);
        Vec64 s = col;
        std::sort(s.begin(), s.end());
        auto pct = [&](double p) {
            const double h = p / 100.0 * static_cast<double>(s.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi = std::min(lo + 1, s.size() - 1);
            return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
        };
        const double l = pct(c), u = pct(100 - c);
        double sum = 0.0;
        for (double v : col) sum += std::clamp(v, l, u);
        out[j] = sum / static_cast<double>(col.size());
    }
    return out;
}

}  // namespace

TEST(Winsorized, ZeroIsMeanBitForBit) {
    Rng r(1);
    for (int t = 0; t < 500; ++t) {
        const Mat64 g = random_stack(r, 1 + r.below(40), 1 + r.below(9));
        const Vec64 a = winsorized_mean(g, 0.0);
        const Vec64 b = column_means(g);
        ASSERT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
    }
}

TEST(Winsorized, MatchesSortOracle) {
    Rng r(2);
    const double cs[] = {0.5, 1, 2, 4, 8, 10, 25, 37.5, 50};
    for (int t = 0; t < 1000; ++t) {
        const Mat64 g = random_stack(r, 1 + r.below(60), 1 + r.below(40));
        for (double c : cs) {
            const Vec64 a = winsorized_mean(g, c);
            const Vec64 b = ref_winsorized(g, c);
            for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 1e-12) << "c=" << c;
        }
    }
}

TEST(Winsorized, FiftyIsCoordinateMedian) {
    Rng r(3);
    for (int t = 0; t < 500; ++t) {
        const Mat64 g = random_stack(r, 1 + r.below(20), 4);
        const Vec64 a = winsorized_mean(g, 50);
        const Vec64 m = coordinate_median(g);
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(a[j], m[j], 1e-15);
            EXPECT_EQ(m[j], percentile(g.column(j), 50));
        }
    }
}

TEST(Winsorized, NeverExtrapolatesAndIgnoresRowOrder) {
    Rng r(4);
    for (int t = 0; t < 500; ++t) {
        const std::size_t m = 2 + r.below(20);
        const Mat64 g = random_stack(r, m, 5);
        double mx = 0.0;
        for (double v : g.data()) mx = std::max(mx, std::abs(v));
        const double c = r.uniform(0, 50);
        const Vec64 a = winsorized_mean(g, c);
        for (double v : a) EXPECT_LE(std::abs(v), mx);
        Mat64 p(m, 5);
        const auto perm = r.permutation(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < 5; ++j) p(i, j) = g(perm[i], j);
        const Vec64 b = winsorized_mean(p, c);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
    }
}

TEST(Winsorized, ToyTables) {
    const Model lin = Model::linear(6);
    const Vec64 gl = winsorized_mean(lin.per_example_grads(Vec64(6, 0.0), dataset_L().train), 50);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(gl[j], 0.0);
    EXPECT_NE(gl[5], 0.0);
    const Vec64 gm = winsorized_mean(lin.per_example_grads(Vec64(6, 0.0), dataset_M().train), 50);
    for (double v : gm) EXPECT_EQ(v, 0.0);
}

TEST(M3, ToyTableSuppressesIdiosyncraticCoordinates) {
    const Model lin = Model::linear(6);
    const Mat64 g = lin.per_example_grads(Vec64(6, 0.0), dataset_L().train);
    const Vec64 u = aggregate(Aggregator::m3(), g.slice_rows(0, 3));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(u[j], 0.0);
    EXPECT_NE(u[5], 0.0);
    EXPECT_THROW(aggregate(Aggregator::m3(), g), std::invalid_argument);
    EXPECT_THROW(aggregate(Aggregator::mean(), Mat64()), std::invalid_argument);
}

TEST(M3Stream, BuffersAndMatchesBatch) {
    M3Stream s;
    EXPECT_FALSE(s.push(Vec64{1, 0}));
    EXPECT_FALSE(s.push(Vec64{0, 1}));
    const auto out = s.push(Vec64{0, 0});
    ASSERT_TRUE(out);
    EXPECT_EQ(*out, (Vec64{0, 0}));
    EXPECT_EQ(s.pending(), 0u);
    Rng r(5);
    for (int t = 0; t < 1000; ++t) {
        const Mat64 g = random_stack(r, 3, 4);
        M3Stream st;
        st.push(g.row(0));
        st.push(g.row(1));
        EXPECT_EQ(*st.push(g.row(2)), aggregate(Aggregator::m3(), g));
    }
    M3Stream eq;
    eq.push(Vec64{2, 3});
    eq.push(Vec64{2, 3});
    EXPECT_EQ(*eq.push(Vec64{2, 3}), (Vec64{2, 3}));
}

TEST(MedianOfMeans, ContiguousGroups) {
    // rows 1..7 in 3 groups: {1,2},{3,4},{5,6,7} -> means 1.5, 3.5, 6 -> median 3.5
    Mat64 g(7, 1, Vec64{1, 2, 3, 4, 5, 6, 7});
    EXPECT_EQ(median_of_means(g, 3)[0], 3.5);
    EXPECT_EQ(median_of_means(g, 1), column_means(g));
    EXPECT_THROW(median_of_means(g, 0), ContractViolation);
}

TEST(Spec, RoundTrip) {
    for (const char* s : {"mean", "winsorized:2.5", "median_of_means:4", "m3"}) {
        EXPECT_EQ(parse_aggregator(s).spec(), s);
    }
    EXPECT_THROW(parse_aggregator("winsorized:60"), std::invalid_argument);
    EXPECT_THROW(parse_aggregator("trimmed"), std::invalid_argument);
}
