#include <gtest/gtest.h>

#include <cmath>

#include "cohgrad/datasets.hpp"

using namespace cohgrad;

namespace {

std::size_t count_tag(const Dataset& d, Tag t) {
    std::size_t n = 0;
    for (const auto& e : d.train) n += e.tag == t;
    return n;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
Vec64 solve(std::vector<Vec64> A, Vec64 b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
        std::swap(A[c], A[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    Vec64 x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
        x[i] = s / A[i][i];
    }
    return x;
}

}  // namespace

TEST(Tables, LRowsBitExact) {
    const Dataset L = dataset_L();
    ASSERT_EQ(L.train.size(), 4u);
    ASSERT_EQ(L.test.size(), 1u);
    EXPECT_EQ(L.train[0].x, (Vec64{1, 0, 0, 0, 0, 1}));
    EXPECT_EQ(L.train[0].y, (Vec64{1}));
    EXPECT_EQ(L.test[0].x, (Vec64{0, 0, 0, 0, -1, -1}));
    EXPECT_EQ(L.test[0].y, (Vec64{-1}));
}

TEST(Tables, MIsOrthogonalAndSharesFirstFiveColumns) {
    const Dataset L = dataset_L();
    const Dataset M = dataset_M();
    EXPECT_EQ(M.train[0].x, (Vec64{1, 0, 0, 0, 0, 0}));
    EXPECT_EQ(M.test.size(), 1u);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (i != j) {
                EXPECT_EQ(dot(M.train[i].x, M.train[j].x), 0.0);
            }
        }
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(L.train[i].x[k], M.train[i].x[k]);
    }
}

TEST(Clusters, DegenerateAndDeterministic) {
    const Dataset e = make_clusters(0, 0, 4, 2, 1.0, 7);
    EXPECT_TRUE(e.train.empty());
    EXPECT_EQ(e.meta.num_classes, 2u);
    const Dataset a = make_clusters(50, 10, 8, 3, 0.5, 1);
    const Dataset b = make_clusters(50, 10, 8, 3, 0.5, 1);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.train[i].x, b.train[i].x);
    EXPECT_THROW(make_clusters(10, 10, 2, 3, 1.0, 1), std::invalid_argument);
}

TEST(Clusters, LeastSquaresProbeSeparates) {
    const Dataset d = make_clusters(1000, 200, 16, 10, 0.5, 1);
    const std::size_t p = 17;  // inputs plus bias
    std::vector<Vec64> A(p, Vec64(p, 0.0));
    std::vector<Vec64> B(10, Vec64(p, 0.0));
    for (const auto& e : d.train) {
        Vec64 x = e.x;
        x.push_back(1.0);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) A[i][j] += x[i] * x[j];
            for (std::size_t c = 0; c < 10; ++c) B[c][i] += x[i] * e.y[c];
        }
    }
    std::vector<Vec64> W;
    for (std::size_t c = 0; c < 10; ++c) W.push_back(solve(A, B[c]));
    std::size_t ok = 0;
    for (const auto& e : d.test) {
        Vec64 x = e.x;
        x.push_back(1.0);
        Vec64 s(10);
        for (std::size_t c = 0; c < 10; ++c) s[c] = dot(W[c], x);
        ok += argmax(s) == argmax(e.y);
    }
    EXPECT_GT(static_cast<double>(ok) / static_cast<double>(d.test.size()), 0.9);
}

TEST(LabelNoise, FractionsAndTags) {
    const Dataset d = make_clusters(400, 10, 10, 10, 1.0, 2);
    const Dataset z = with_label_noise(d, 0.0, 1);
    EXPECT_EQ(count_tag(z, Tag::pristine), 400u);
    for (std::size_t i = 0; i < 400; ++i) EXPECT_EQ(z.train[i].y, d.train[i].y);
    const Dataset all = with_label_noise(d, 1.0, 1);
    EXPECT_EQ(count_tag(all, Tag::corrupt), 400u);
    const Dataset q = with_label_noise(d, 0.25, 1);
    EXPECT_EQ(count_tag(q, Tag::corrupt), 100u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(q.test[i].y, d.test[i].y);
    EXPECT_THROW(with_label_noise(outlier_regression(100, 0.1, 10, 1), 0.5, 1), std::invalid_argument);
}

TEST(LabelNoise, KeptLabelFractionMatchesArithmetic) {
    // 75% untouched plus a tenth of the resampled quarter keep their label.
    const Dataset d = make_clusters(4000, 0, 10, 10, 1.0, 3);
    double kept = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const Dataset q = with_label_noise(d, 0.25, 100 + r);
        for (std::size_t i = 0; i < d.train.size(); ++i) kept += q.train[i].y == d.train[i].y;
    }
    EXPECT_NEAR(kept / (reps * 4000.0), 0.775, 0.005);
}

TEST(PixelNoise, CountsAndDecorrelation) {
    const Dataset d = make_clusters(101, 0, 64, 10, 1.0, 4);
    EXPECT_EQ(count_tag(with_pixel_noise(d, 0.5, 1), Tag::corrupt), 50u);
    const Dataset z = with_pixel_noise(d, 0.0, 1);
    for (std::size_t i = 0; i < d.train.size(); ++i) EXPECT_EQ(z.train[i].x, d.train[i].x);
    // Independent rows in 64 dims: E[rho^2] = 1/64.
    const Dataset n = with_pixel_noise(d, 1.0, 1);
    double sq = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = i + 1; j < 40; ++j) {
            const auto& a = n.train[i].x;
            const auto& b = n.train[j].x;
            const double rho = dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
            sq += rho * rho;
            ++pairs;
        }
    }
    EXPECT_LT(sq / pairs, 2.0 / 64.0);
}

TEST(SparseClusters, ShapesAndNoiseKeepsSparsity) {
    SparseClusterSpec sp;
    sp.n_train = 60;
    sp.n_test = 10;
    sp.pool = 100;
    sp.active_prob = 1.0;
    const Dataset d = make_sparse_clusters(sp, 1);
    EXPECT_EQ(d.input_dim(), 10u * 10u + 100u);
    const Dataset n = with_sparse_noise(d, 1.0, 2);
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        double a = 0, b = 0;
        for (double v : d.train[i].x) a += v;
        for (double v : n.train[i].x) {
            b += v;
            EXPECT_TRUE(v == 0.0 || v == 1.0);
        }
        EXPECT_EQ(a, b);
        EXPECT_EQ(n.train[i].tag, Tag::corrupt);
    }
}

TEST(Outliers, CleanAndCorrupt) {
    const Dataset c = outlier_regression(100, 0.0, 0, 5);
    for (const auto& e : c.train) EXPECT_DOUBLE_EQ(e.y[0], 2 * e.x[0] + 3);
    const Dataset d = outlier_regression(100, 0.1, 10, 5);
    EXPECT_EQ(count_tag(d, Tag::corrupt), 10u);
    for (const auto& e : d.train) {
        if (e.tag == Tag::corrupt) {
            EXPECT_GE(e.x[0], 1.0);
            EXPECT_EQ(e.y[0], -1.0);
        }
    }
    EXPECT_THROW(outlier_regression(10, 0.1, 50, 5), std::runtime_error);
}

TEST(Outliers, PristineLeastSquaresSlope) {
    const Dataset d = outlier_regression(100, 0.1, 10, 6);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& e : d.train) {
        if (e.tag == Tag::corrupt) continue;
        const double x = e.x[0], y = e.y[0];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope, 2.0, 0.1);
}
