#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ssmar;

namespace {

Example1Config small_config(std::uint64_t seed) {
    Example1Config cfg;
    cfg.cluster_sizes = {3, 4, 3};
    cfg.T = 400;
    cfg.seed = seed;
    return cfg;
}

GroundTruth toy_truth() {
    GroundTruth g;
    g.cluster_sizes = {2, 1};
    g.labels = {0, 0, 1};
    g.adjacency = IMatrix::Zero(3, 3);
    g.adjacency(1, 0) = 1;
    g.adjacency(2, 1) = 1;
    return g;
}

// Probability that a random positive outscores a random negative, ties counting one half.
double mann_whitney(const Matrix& s, const GroundTruth& g) {
    std::vector<double> pos, neg;
    for (Index i = 0; i < g.d(); ++i)
        for (Index j = 0; j < g.d(); ++j)
            if (i != j) (g.adjacency(i, j) ? pos : neg).push_back(s(i, j));
    double win = 0.0;
    for (double p : pos)
        for (double n : neg) win += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return win / static_cast<double>(pos.size() * neg.size());
}

}  // namespace

TEST(ClusterLabels, FromSizes) {
    const Vector l = cluster_labels_from_sizes({2, 1, 3});
    EXPECT_EQ(l, (Vector(6) << 0, 0, 1, 2, 2, 2).finished());
    EXPECT_THROW(cluster_labels_from_sizes({2, 0}), Error);
}

TEST(CompanionRadius, ScalarPolynomialRoots) {
    // x(t) = 0.5 x(t-1) + 0.3 x(t-2) - 0.1 x(t-3): roots of z^3 - 0.5 z^2 - 0.3 z + 0.1.
    std::array<Matrix, 3> lags{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, -0.1)};
    Matrix C(3, 3);
    C << 0.5, 0.3, -0.1, 1, 0, 0, 0, 1, 0;
    const double expect = Eigen::EigenSolver<Matrix>(C).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(companion_spectral_radius(lags), expect, 1e-12);
    // A root at 1 for the sum-to-one case.
    std::array<Matrix, 3> unit{Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.5)};
    EXPECT_NEAR(companion_spectral_radius(unit), 1.0, 1e-9);
}

TEST(Example1, StructureRespectsConfiguration) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Example1Data d = generate_example1(small_config(seed));
        const GroundTruth& g = d.truth;
        EXPECT_EQ(g.d(), 10);
        EXPECT_EQ(d.y.values.rows(), 10);
        EXPECT_EQ(d.y.values.cols(), 400);
        EXPECT_EQ(g.adjacency.diagonal().sum(), 0);
        EXPECT_LE(companion_spectral_radius(g.lag_coeffs), 0.95 + 1e-9);
        for (Index i = 0; i < 10; ++i)
            for (Index j = 0; j < 10; ++j) {
                const bool any = g.lag_coeffs[0](i, j) != 0.0 || g.lag_coeffs[1](i, j) != 0.0 || g.lag_coeffs[2](i, j) != 0.0;
                EXPECT_EQ(any, i == j || g.adjacency(i, j) == 1) << i << "," << j;
            }
        EXPECT_TRUE(((g.gains.array() >= 0.8) && (g.gains.array() <= 1.2)).all());
        EXPECT_LT((d.y.values - d.signal - d.noise).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Example1, DensityExtremesGiveBlockAdjacency) {
    Example1Config cfg = small_config(4);
    cfg.within_density = 1.0;
    cfg.between_density = 0.0;
    const GroundTruth g = generate_example1(cfg).truth;
    for (Index i = 0; i < g.d(); ++i)
        for (Index j = 0; j < g.d(); ++j) EXPECT_EQ(g.adjacency(i, j), (i != j && g.within(i, j)) ? 1 : 0);
}

TEST(Example1, SubsetSplitAlsoStable) {
    Example1Config cfg = small_config(5);
    cfg.lag_split = Example1Config::LagSplit::subset;
    const GroundTruth g = generate_example1(cfg).truth;
    EXPECT_LE(companion_spectral_radius(g.lag_coeffs), 0.95 + 1e-9);
}

TEST(Example1, SeedsControlTruthAndRealization) {
    const Example1Data a = generate_example1(small_config(7));
    const Example1Data b = generate_example1(small_config(7));
    EXPECT_EQ(a.y.values, b.y.values);
    Example1Config cfg = small_config(7);
    cfg.series_seed = 99;
    const Example1Data c = generate_example1(cfg);
    EXPECT_EQ(c.truth.adjacency, a.truth.adjacency);
    EXPECT_EQ(c.truth.lag_coeffs[0], a.truth.lag_coeffs[0]);
    EXPECT_NE(c.y.values, a.y.values);
    EXPECT_NE(generate_example1(small_config(8)).truth.adjacency, a.truth.adjacency);
}

TEST(Example1, SignalToNoiseRatio) {
    Example1Config cfg = small_config(9);
    cfg.T = 20000;
    const Example1Data d = generate_example1(cfg);
    for (Index i = 0; i < d.truth.d(); ++i) {
        auto var = [](const auto& r) { return (r.array() - r.mean()).square().sum() / static_cast<double>(r.size() - 1); };
        EXPECT_NEAR(var(d.signal.row(i)) / var(d.noise.row(i)), 10.0, 1.5);
    }
}

TEST(Ar1Noise, MomentsMatchStationaryLaw) {
    Matrix cov(2, 2);
    cov << 1.0, 0.4, 0.4, 2.0;
    Rng rng(10);
    const Index T = 200000;
    const Matrix e = generate_ar1_noise(T, 0.5, cov, rng);
    const Matrix emp = e * e.transpose() / static_cast<double>(T);
    const Matrix expect = cov / 0.75;
    EXPECT_LT((emp - expect).cwiseAbs().maxCoeff(), 0.05);
    const double lag1 = e.row(0).head(T - 1).dot(e.row(0).tail(T - 1)) / e.row(0).squaredNorm();
    EXPECT_NEAR(lag1, 0.5, 0.01);
    EXPECT_THROW(generate_ar1_noise(10, 1.0, cov, rng), Error);
    Matrix bad = cov;
    bad(0, 1) = 5.0;
    EXPECT_THROW(generate_ar1_noise(10, 0.5, bad, rng), Error);
    bad(1, 0) = 5.0;
    EXPECT_THROW(generate_ar1_noise(10, 0.5, bad, rng), Error);
}

TEST(BlockCorrelation, BlockDiagonalPositiveDefinite) {
    Rng rng(11);
    const Matrix S = block_correlation({3, 2}, 0.5, rng, false);
    EXPECT_EQ(S.diagonal(), Vector::Ones(5));
    EXPECT_EQ(S.block(0, 3, 3, 2), Matrix::Zero(3, 2));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().minCoeff(), 0.0);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            if (i != j) {
                EXPECT_GE(S(i, j), 0.0);
                EXPECT_LE(S(i, j), 0.5);
            }
}

TEST(BlockCorrelation, ShrinkFallbackOrError) {
    // With large bounds on a big block, every draw has a negative eigenvalue.
    Rng a(12), b(12);
    EXPECT_THROW(block_correlation({40}, 5.0, a, false), Error);
    const Matrix S = block_correlation({40}, 5.0, b, true);
    EXPECT_NEAR(Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().minCoeff(), 0.1, 1e-9);
    EXPECT_EQ(S.diagonal(), Vector::Ones(40));
}

TEST(Roc, MatchesMannWhitneyOracle) {
    Rng rng(13);
    const GroundTruth g = generate_example1(small_config(14)).truth;
    for (int rep = 0; rep < 10; ++rep) {
        // Coarse scores to exercise ties.
        Matrix s = Matrix::NullaryExpr(g.d(), g.d(), [&] { return std::round(rng.uniform() * 5.0) / 5.0; });
        s += 0.3 * g.adjacency.cast<double>();
        const RocCurve rc = roc_curve(s, g);
        EXPECT_NEAR(rc.auc, mann_whitney(s, g), 1e-12);
        EXPECT_EQ(rc.points.front().fpr, 0.0);
        EXPECT_EQ(rc.points.back().fpr, 1.0);
        EXPECT_EQ(rc.points.back().tpr, 1.0);
    }
}

TEST(Roc, HandExampleAndRestrictions) {
    const GroundTruth g = toy_truth();
    Matrix s = Matrix::Zero(3, 3);
    s(1, 0) = 0.9;  // within positive
    s(2, 1) = 0.2;  // between positive
    s(0, 1) = 0.5;  // within negative
    s(0, 2) = 0.3;
    const RocCurve rc = roc_curve(s, g);
    // Positives 0.9, 0.2; negatives 0.5, 0.3, 0, 0. Wins: 4 + 2 = 6 of 8.
    EXPECT_DOUBLE_EQ(rc.auc, 0.75);
    EXPECT_DOUBLE_EQ(roc_curve(s, g, PairSet::within).auc, 1.0);
    const SelectionRates r = selection_rates(s, g, 0.3);
    EXPECT_DOUBLE_EQ(r.tpr, 0.5);
    EXPECT_DOUBLE_EQ(r.fpr, 0.25);
    const SelectionRates w = selection_rates(s, g, 0.3, PairSet::within);
    EXPECT_DOUBLE_EQ(w.tpr, 1.0);
    EXPECT_DOUBLE_EQ(w.fpr, 1.0);
    GroundTruth none = g;
    none.adjacency.setZero();
    EXPECT_THROW(roc_curve(s, none), Error);
}

TEST(LeastSquaresBaseline, RecoversVar1Coefficients) {
    Rng rng(15);
    Matrix A(3, 3);
    A << 0.5, 0.0, 0.0, 0.4, 0.3, 0.0, 0.0, -0.4, 0.2;
    const Index T = 50000;
    Matrix y(3, T);
    y.col(0).setZero();
    for (Index t = 1; t < T; ++t) y.col(t) = A * y.col(t - 1) + rng.normal_vector(3);
    const Matrix s = lag1_least_squares_scores(y);
    // Scores are on standardized channels: A_ij * sd_j / sd_i.
    Vector sd(3);
    for (Index i = 0; i < 3; ++i) sd(i) = std::sqrt((y.row(i).array() - y.row(i).mean()).square().mean());
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) EXPECT_NEAR(s(i, j), std::abs(A(i, j)) * sd(j) / sd(i), 0.02);
}
