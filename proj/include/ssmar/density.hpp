#pragma once

// Exact unnormalized log joint density log p(Y, X, theta).

#include "ssmar/core.hpp"

#include <cmath>

namespace ssmar {

struct LogJointTerms {
    double observation = 0.0;
    double state = 0.0;
    double initial = 0.0;
    double prior_gamma = 0.0;
    double prior_B = 0.0;
    double prior_m = 0.0;
    double prior_p = 0.0;
    double prior_A = 0.0;
    double prior_c = 0.0;
    double prior_mu = 0.0;
    double prior_tau = 0.0;

    double prior() const {
        return prior_gamma + prior_B + prior_m + prior_p + prior_A + prior_c + prior_mu + prior_tau;
    }
    double total() const { return observation + state + initial + prior(); }
};

namespace detail {

inline double bernoulli_logpmf(int g, double q) { return g ? std::log(q) : std::log1p(-q); }

inline void fill_prior_terms(const ModelParams& t, const Hyperparams& h, LogJointTerms& out) {
    const Index d = t.d();
    const Index K = t.K();

    double lg = 0.0;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            lg += bernoulli_logpmf(t.gamma(i, j), t.B(t.m[static_cast<size_t>(i)], t.m[static_cast<size_t>(j)]));
    out.prior_gamma = lg;

    out.prior_B = -static_cast<double>(K) * std::log(1.0 - h.l0) -
                  static_cast<double>(K * (K - 1)) * std::log(h.u0);

    double lm = 0.0;
    for (int k : t.m) lm += std::log(t.p(k));
    out.prior_m = lm;

    double lp = std::lgamma(h.alpha.sum());
    for (Index k = 0; k < K; ++k) {
        lp -= std::lgamma(h.alpha(k));
        lp += xlogy(h.alpha(k) - 1.0, t.p(k));
    }
    out.prior_p = lp;

    const double va = h.xi0 * h.xi0;
    const double v1 = h.xi1 * h.xi1;
    out.prior_A = -0.5 * static_cast<double>(d * d) * (kLog2Pi + std::log(va)) - 0.5 * t.A.squaredNorm() / va;
    out.prior_c = -0.5 * static_cast<double>(d) * (kLog2Pi + std::log(v1)) - 0.5 * t.c.squaredNorm() / v1;
    out.prior_mu = -0.5 * static_cast<double>(d) * (kLog2Pi + std::log(v1)) - 0.5 * t.mu.squaredNorm() / v1;

    double lt = 0.0;
    const double norm = h.rho0 * std::log(h.rho0) - std::lgamma(h.rho0);
    for (Index i = 0; i < d; ++i) lt += norm - (1.0 + h.rho0) * std::log(t.tau(i)) - h.rho0 / t.tau(i);
    out.prior_tau = lt;
}

}  // namespace detail

// Term-by-term decomposition. Terms are -inf when theta is outside the prior support.
inline LogJointTerms log_joint_terms(const Matrix& y, const LatentStates& x, const ModelParams& theta,
                                     const Hyperparams& h) {
    check_dimensions(theta);
    const Index d = theta.d();
    const Index T = y.cols();
    if (y.rows() != d || x.rows() != d || x.cols() != T + 1)
        throw Error("log_joint_density: Y must be d x T and X must be d x (T+1)");
    if (h.K() != theta.K()) throw Error("log_joint_density: alpha length must equal K");

    LogJointTerms out;
    if (!support_violation(theta, h).empty()) {
        out.prior_B = kNegInf;
        return out;
    }

    double obs = 0.0;
    for (Index i = 0; i < d; ++i) {
        const double ltau = std::log(theta.tau(i));
        double ss = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double r = y(i, t) - theta.c(i) * x(i, t + 1);
            ss += r * r;
        }
        obs += -0.5 * static_cast<double>(T) * (kLog2Pi + ltau) - 0.5 * ss / theta.tau(i);
    }
    out.observation = obs;

    const Matrix F = theta.transition();
    const Matrix resid = x.rightCols(T) - F * x.leftCols(T);
    out.state = -0.5 * static_cast<double>(d * T) * kLog2Pi - 0.5 * resid.squaredNorm();
    out.initial = -0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * (x.col(0) - theta.mu).squaredNorm();

    detail::fill_prior_terms(theta, h, out);
    return out;
}

inline double log_joint_density(const Matrix& y, const LatentStates& x, const ModelParams& theta,
                                const Hyperparams& h) {
    return log_joint_terms(y, x, theta, h).total();
}

// log p(theta) alone.
inline double log_prior(const ModelParams& theta, const Hyperparams& h) {
    check_dimensions(theta);
    if (!support_violation(theta, h).empty()) return kNegInf;
    LogJointTerms out;
    detail::fill_prior_terms(theta, h, out);
    return out.prior();
}

}  // namespace ssmar
