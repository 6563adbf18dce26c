#include "oracles.hpp"

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

using namespace ssmar;

namespace {

ModelParams tiny_params() {
    ModelParams s;
    s.gamma = IMatrix::Zero(1, 1);
    s.A = Matrix::Zero(1, 1);
    s.B = Matrix::Constant(1, 1, 0.95);
    s.m = {0};
    s.c = Vector::Ones(1);
    s.tau = Vector::Ones(1);
    s.mu = Vector::Zero(1);
    s.p = Vector::Ones(1);
    return s;
}

// Factor-by-factor reference using Boost distributions and explicit loops.
double reference_log_joint(const Matrix& y, const Matrix& x, const ModelParams& s, const Hyperparams& h) {
    namespace bm = boost::math;
    const Index d = s.d(), T = y.cols(), K = s.K();
    double v = 0.0;
    for (Index i = 0; i < d; ++i)
        for (Index t = 1; t <= T; ++t)
            v += std::log(bm::pdf(bm::normal(s.c(i) * x(i, t), std::sqrt(s.tau(i))), y(i, t - 1)));
    for (Index i = 0; i < d; ++i)
        for (Index t = 1; t <= T; ++t) {
            double mean = 0.0;
            for (Index j = 0; j < d; ++j) mean += s.gamma(i, j) * s.A(i, j) * x(j, t - 1);
            v += std::log(bm::pdf(bm::normal(mean, 1.0), x(i, t)));
        }
    for (Index i = 0; i < d; ++i) v += std::log(bm::pdf(bm::normal(s.mu(i), 1.0), x(i, 0)));
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) {
            const double q = s.B(s.m[i], s.m[j]);
            v += std::log(s.gamma(i, j) ? q : 1.0 - q);
            v += std::log(bm::pdf(bm::normal(0.0, h.xi0), s.A(i, j)));
        }
    for (Index a = 0; a < K; ++a)
        for (Index b = 0; b < K; ++b) v += std::log(a == b ? 1.0 / (1.0 - h.l0) : 1.0 / h.u0);
    for (Index i = 0; i < d; ++i) v += std::log(s.p(s.m[i]));
    double dir = std::lgamma(h.alpha.sum());
    for (Index k = 0; k < K; ++k) dir += -std::lgamma(h.alpha(k)) + (h.alpha(k) - 1.0) * std::log(s.p(k));
    v += dir;
    for (Index i = 0; i < d; ++i) {
        v += std::log(bm::pdf(bm::normal(0.0, h.xi1), s.c(i)));
        v += std::log(bm::pdf(bm::normal(0.0, h.xi1), s.mu(i)));
        v += std::log(bm::pdf(bm::inverse_gamma_distribution<double>(h.rho0, h.rho0), s.tau(i)));
    }
    return v;
}

}  // namespace

TEST(Hyperparams, DefaultsForThreeClusters) {
    const Hyperparams h = default_hyperparams(3);
    EXPECT_EQ(h.alpha, Vector::Ones(3));
}

TEST(Hyperparams, SingleCluster) {
    const Hyperparams h = default_hyperparams(1);
    ASSERT_EQ(h.K(), 1);
    EXPECT_EQ(h.alpha(0), 1.0);
    EXPECT_NO_THROW(validate_hyperparams(h));
}

TEST(Hyperparams, BlockBoundsForFiveClusters) {
    const Hyperparams h = default_hyperparams(5);
    EXPECT_EQ(h.l0, 0.9);
    EXPECT_EQ(h.u0, 0.1);
    EXPECT_EQ(h.xi0, 1.0);
    EXPECT_EQ(h.xi1, 10.0);
    EXPECT_EQ(h.rho0, 0.01);
}

TEST(Hyperparams, RejectsInvalid) {
    EXPECT_THROW(default_hyperparams(0), Error);
    Hyperparams h = default_hyperparams(2);
    h.u0 = 0.95;
    EXPECT_THROW(validate_hyperparams(h), Error);
}

TEST(LogJoint, OffDiagonalBOutsideSupportIsNegInf) {
    Rng rng(3);
    ModelParams s = oracle::random_params(2, 2, rng);
    s.B(0, 1) = 0.5;
    const Matrix y = Matrix::Zero(2, 3);
    const Matrix x = Matrix::Zero(2, 4);
    EXPECT_EQ(log_joint_density(y, x, s, default_hyperparams(2)), kNegInf);
    EXPECT_EQ(log_prior(s, default_hyperparams(2)), kNegInf);
}

TEST(LogJoint, StandardNormalTermsAtZero) {
    const ModelParams s = tiny_params();
    const LogJointTerms t = log_joint_terms(Matrix::Zero(1, 1), Matrix::Zero(1, 2), s, default_hyperparams(1));
    const double half = -0.5 * std::log(2.0 * M_PI);
    EXPECT_DOUBLE_EQ(t.observation, half);
    EXPECT_DOUBLE_EQ(t.state, half);
    EXPECT_DOUBLE_EQ(t.initial, half);
}

TEST(LogJoint, MatchesFactorByFactorReference) {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        ModelParams s = oracle::random_params(2, 2, rng);
        s.B << 0.93, 0.02, 0.07, 0.97;
        s.p << 0.3, 0.7;
        Hyperparams h = default_hyperparams(2);
        h.alpha << 1.5, 2.0;
        const Matrix y = Matrix::NullaryExpr(2, 3, [&] { return rng.normal(); });
        const Matrix x = Matrix::NullaryExpr(2, 4, [&] { return rng.normal(); });
        const double ref = reference_log_joint(y, x, s, h);
        EXPECT_NEAR(log_joint_density(y, x, s, h), ref, 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST(LogJoint, FiniteInsideSupport) {
    Rng rng(5);
    const ModelParams s = oracle::random_params(3, 2, rng);
    const Matrix y = Matrix::NullaryExpr(3, 4, [&] { return rng.normal(); });
    const Matrix x = Matrix::NullaryExpr(3, 5, [&] { return rng.normal(); });
    const Hyperparams h = default_hyperparams(2);
    EXPECT_TRUE(std::isfinite(log_joint_density(y, x, s, h)));
    ModelParams bad = s;
    bad.tau(1) = -1.0;
    EXPECT_EQ(log_joint_density(y, x, bad, h), kNegInf);
    bad = s;
    bad.B(0, 0) = 0.5;
    EXPECT_EQ(log_joint_density(y, x, bad, h), kNegInf);
}

TEST(LogJoint, ShiftingYChangesOnlyObservationTerm) {
    Rng rng(8);
    const ModelParams s = oracle::random_params(3, 2, rng);
    const Matrix y = Matrix::NullaryExpr(3, 6, [&] { return rng.normal(); });
    const Matrix x = Matrix::NullaryExpr(3, 7, [&] { return rng.normal(); });
    const Hyperparams h = default_hyperparams(2);
    const LogJointTerms a = log_joint_terms(y, x, s, h);
    const LogJointTerms b = log_joint_terms(y.array() + 2.5, x, s, h);
    EXPECT_NE(a.observation, b.observation);
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.initial, b.initial);
    EXPECT_EQ(a.prior(), b.prior());
}

TEST(LogJoint, LabelSwitchingSymmetry) {
    Rng rng(21);
    ModelParams s = oracle::random_params(4, 2, rng);
    s.B << 0.91, 0.03, 0.08, 0.99;
    s.p << 0.35, 0.65;
    const Matrix y = Matrix::NullaryExpr(4, 5, [&] { return rng.normal(); });
    const Matrix x = Matrix::NullaryExpr(4, 6, [&] { return rng.normal(); });
    const Hyperparams h = default_hyperparams(2);
    ModelParams w = s;
    for (auto& k : w.m) k = 1 - k;
    w.B << s.B(1, 1), s.B(1, 0), s.B(0, 1), s.B(0, 0);
    w.p << s.p(1), s.p(0);
    EXPECT_NEAR(log_joint_density(y, x, s, h), log_joint_density(y, x, w, h), 1e-10);
}

TEST(LogJoint, DimensionMismatchThrows) {
    const ModelParams s = tiny_params();
    EXPECT_THROW(log_joint_density(Matrix::Zero(1, 2), Matrix::Zero(1, 2), s, default_hyperparams(1)), Error);
}

TEST(Series, ValidationRejectsBadInput) {
    EXPECT_THROW(validate_series(make_series(Matrix::Zero(1, 10), 100.0)), Error);
    EXPECT_THROW(validate_series(make_series(Matrix::Zero(2, 1), 100.0)), Error);
    Matrix v = Matrix::Zero(2, 5);
    v(1, 2) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(validate_series(make_series(v, 100.0)), Error);
    EXPECT_THROW(validate_series(make_series(Matrix::Zero(2, 5), 100.0, {"a"})), Error);
    EXPECT_NO_THROW(validate_series(make_series(Matrix::Zero(2, 5), 100.0)));
}

TEST(ModelParams, MembershipIsOneHot) {
    Rng rng(2);
    const ModelParams s = oracle::random_params(5, 3, rng);
    const Matrix M = s.membership();
    EXPECT_EQ(M.colwise().sum(), Matrix::Ones(1, 5));
    for (Index i = 0; i < 5; ++i) EXPECT_EQ(M(s.m[i], i), 1.0);
}
