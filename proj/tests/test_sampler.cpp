#include "checks.hpp"

#include <gtest/gtest.h>

using namespace ssmar;

namespace {

void expect_all(const std::vector<oracle::Check>& cs) {
    for (const auto& c : cs) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
}

}  // namespace

TEST(EdgeConditional, MatchesQuadrature) {
    Rng rng(1);
    expect_all(oracle::check_edge_conditionals(rng));
}

TEST(EdgeConditional, ZeroDataReducesToPrior) {
    const EdgeConditional e = edge_conditional(0.0, 0.0, 0.3, 1.0);
    EXPECT_DOUBLE_EQ(e.log_odds, std::log(0.3 / 0.7));
    EXPECT_DOUBLE_EQ(e.post_mean, 0.0);
    EXPECT_DOUBLE_EQ(e.post_var, 1.0);
}

TEST(EdgeConditional, CertainPriorForcesEdge) {
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        int g = -1;
        double a = 0.0;
        detail::draw_edge(edge_conditional(5.0, -100.0, 1.0, 1.0), 1.0, 1.0, g, a, rng);
        EXPECT_EQ(g, 1);
    }
}

TEST(ClusterLabels, MatchesEnumeration) {
    Rng rng(3);
    expect_all(oracle::check_label_conditional(rng));
}

TEST(ClusterLabels, SingleClusterKeepsZero) {
    Rng rng(4);
    ModelParams s = oracle::random_params(4, 1, rng);
    sample_cluster_labels(s, default_hyperparams(1), rng);
    for (int m : s.m) EXPECT_EQ(m, 0);
}

TEST(BlockProbs, MatchesBetaConditionalAndKs) {
    Rng rng(5);
    expect_all(oracle::check_block_conditional(rng));
}

TEST(BlockProbs, DrawsStayInPriorSupport) {
    Rng rng(6);
    ModelParams s = oracle::random_params(6, 3, rng);
    const Hyperparams h = default_hyperparams(3);
    for (int r = 0; r < 200; ++r) {
        sample_block_probs(s, h, rng);
        for (Index a = 0; a < 3; ++a)
            for (Index b = 0; b < 3; ++b) {
                if (a == b) {
                    EXPECT_GE(s.B(a, b), h.l0);
                    EXPECT_LE(s.B(a, b), 1.0);
                } else {
                    EXPECT_GE(s.B(a, b), 0.0);
                    EXPECT_LE(s.B(a, b), h.u0);
                }
            }
    }
}

TEST(BlockProbs, RejectsInvalidShape) {
    Rng rng(7);
    EXPECT_THROW(sample_truncated_beta(0.5, 2.0, 0.0, 0.1, rng), Error);
    EXPECT_THROW(sample_truncated_beta(2.0, 2.0, 0.5, 0.5, rng), Error);
}

TEST(ClusterWeights, MatchesDirichlet) {
    Rng rng(8);
    expect_all(oracle::check_weight_conditional(rng));
}

TEST(ObservationParams, MatchGridAndQuadrature) {
    Rng rng(9);
    expect_all(oracle::check_observation_conditionals(rng));
}

TEST(Geweke, JointDistributionAgrees) {
    expect_all(oracle::check_geweke(20000, 10));
}

TEST(RunChain, DeterministicAndConsistent) {
    Rng rng(11);
    ModelParams s = oracle::random_params(4, 2, rng);
    const Matrix y = simulate_states(s, 60, rng).second;
    ChainConfig cfg;
    cfg.n_iter = 60;
    cfg.n_burnin = 20;
    cfg.thin = 3;
    cfg.seed = 42;
    const Hyperparams h = default_hyperparams(2);
    const ChainOutput a = run_chain(y, s, cfg, h);
    const ChainOutput b = run_chain(y, s, cfg, h);
    EXPECT_EQ(a.gamma_sum, b.gamma_sum);
    EXPECT_EQ(a.traces, b.traces);
    EXPECT_EQ(a.n_retained, 14);
    EXPECT_EQ(a.traces.rows(), 14);
    EXPECT_EQ(static_cast<size_t>(a.traces.cols()), a.trace_names.size());
    for (Index i = 0; i < 4; ++i) EXPECT_EQ(a.same_cluster_sum(i, i), a.n_retained);
    EXPECT_EQ(a.same_cluster_sum, a.same_cluster_sum.transpose());
    EXPECT_LE(a.gamma_sum.maxCoeff(), a.n_retained);
    EXPECT_GE(a.gamma_sum.minCoeff(), 0);
    cfg.seed = 43;
    EXPECT_NE(run_chain(y, s, cfg, h).traces, a.traces);
}

TEST(RunChain, RecoversStrongEdge) {
    ModelParams s;
    const Index d = 3;
    s.gamma = IMatrix::Zero(d, d);
    s.A = Matrix::Zero(d, d);
    // Self-loops make every node autocorrelated, which separates c from tau.
    s.gamma.diagonal().setOnes();
    s.A.diagonal().setConstant(0.6);
    s.gamma(1, 0) = 1;
    s.A(1, 0) = 0.8;
    s.B = Matrix::Constant(1, 1, 0.95);
    s.m = {0, 0, 0};
    s.c = Vector::Ones(d);
    s.tau = Vector::Constant(d, 0.1);
    s.mu = Vector::Zero(d);
    s.p = Vector::Ones(1);
    Rng rng(12);
    const Matrix y = simulate_states(s, 400, rng).second;
    ModelParams init = s;
    init.gamma(1, 0) = 0;
    init.A(1, 0) = 0.0;
    init.B(0, 0) = 0.5 * (0.9 + 1.0);
    ChainConfig cfg;
    cfg.n_iter = 600;
    cfg.n_burnin = 200;
    const ChainOutput out = run_chain(y, init, cfg, default_hyperparams(1));
    EXPECT_GT(out.gamma_sum(1, 0), 0.95 * out.n_retained);
    const Index col = std::find(out.trace_names.begin(), out.trace_names.end(), "A[2,1]") - out.trace_names.begin();
    ASSERT_LT(col, out.traces.cols());
    EXPECT_NEAR(out.traces.col(col).mean(), 0.8, 0.15);
}

TEST(RunChain, RejectsBadConfiguration) {
    Rng rng(13);
    const ModelParams s = oracle::random_params(3, 1, rng);
    const Matrix y = Matrix::Zero(3, 10);
    ChainConfig cfg;
    cfg.n_iter = 10;
    cfg.n_burnin = 10;
    EXPECT_THROW(run_chain(y, s, cfg, default_hyperparams(1)), Error);
    cfg.n_burnin = 2;
    EXPECT_THROW(run_chain(Matrix::Zero(2, 10), s, cfg, default_hyperparams(1)), Error);
    EXPECT_THROW(run_chain(y, s, cfg, default_hyperparams(2)), Error);
}
