#pragma once

// Linear-Gaussian state-space engine for
//   x(0) ~ N(mu, I),  x(t) = (Gamma .* A) x(t-1) + eta(t),  eta ~ N(0, I)
//   y(t) = diag(c) x(t) + eps(t),  eps ~ N(0, diag(tau))
//
// The model is time-invariant, so the Riccati recursion converges. Once the filtered covariance
// stops changing (relative change below `steady_tol`) the gain and covariances are frozen and
// the remaining steps cost O(d^2) instead of O(d^3).

#include "ssmar/core.hpp"
#include "ssmar/random.hpp"

#include <algorithm>
#include <vector>

namespace ssmar {

inline constexpr double kSteadyTol = 1e-13;

namespace detail {

inline void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline bool converged(const Matrix& a, const Matrix& b, double tol) {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() <= tol * scale;
}

// Lower factor L with L L' = cov; falls back to a clipped eigen-decomposition for PSD input.
inline Matrix psd_factor(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

// Covariances are stored until the recursion becomes stationary; later indices share the last entry.
struct FilterResult {
    std::vector<Vector> pred_mean;  // index 0..T, pred_mean[0] = mu
    std::vector<Vector> filt_mean;  // index 0..T, filt_mean[0] = mu
    std::vector<Matrix> pred_cov_store;
    std::vector<Matrix> filt_cov_store;
    Index steady_from = 0;  // first index whose covariances repeat to the end
    double loglik = 0.0;

    Index horizon() const { return static_cast<Index>(filt_mean.size()) - 1; }
    const Matrix& pred_cov(Index t) const {
        return pred_cov_store[static_cast<size_t>(std::min<Index>(t, pred_cov_store.size() - 1))];
    }
    const Matrix& filt_cov(Index t) const {
        return filt_cov_store[static_cast<size_t>(std::min<Index>(t, filt_cov_store.size() - 1))];
    }
};

struct SmootherResult {
    std::vector<Vector> smooth_mean;  // index 0..T
    std::vector<Matrix> smooth_cov;   // index 0..T
    std::vector<Matrix> crosscov;     // index 1..T: Cov(x(t), x(t-1) | Y); entry 0 is zero
    double loglik = 0.0;
};

inline FilterResult kalman_filter(const Matrix& y, const ModelParams& theta, double steady_tol = kSteadyTol) {
    check_dimensions(theta);
    const Index d = theta.d();
    const Index T = y.cols();
    if (y.rows() != d) throw Error("kalman_filter: Y has " + std::to_string(y.rows()) + " rows, expected " +
                                   std::to_string(d));
    if ((theta.tau.array() <= 0.0).any()) throw Error("kalman_filter: tau must be positive");

    const Matrix F = theta.transition();
    const Vector& c = theta.c;
    const Matrix I = Matrix::Identity(d, d);

    FilterResult res;
    res.pred_mean.reserve(static_cast<size_t>(T + 1));
    res.filt_mean.reserve(static_cast<size_t>(T + 1));
    res.pred_mean.push_back(theta.mu);
    res.filt_mean.push_back(theta.mu);
    res.pred_cov_store.push_back(I);
    res.filt_cov_store.push_back(I);

    Vector m = theta.mu;
    Matrix P = I;
    Matrix Pp(d, d), K(d, d);
    Eigen::LLT<Matrix> S_llt;
    double logdetS = 0.0;
    bool steady = false;
    res.steady_from = T + 1;

    for (Index t = 1; t <= T; ++t) {
        const Vector mp = F * m;
        if (!steady) {
            Pp.noalias() = F * P * F.transpose();
            Pp += I;
            detail::symmetrize(Pp);
            Matrix S = (c * c.transpose()).cwiseProduct(Pp);
            S.diagonal() += theta.tau;
            S_llt.compute(S);
            if (S_llt.info() != Eigen::Success)
                throw Error("kalman_filter: innovation covariance is numerically singular at t=" + std::to_string(t));
            logdetS = 2.0 * S_llt.matrixLLT().diagonal().array().log().sum();
            K = S_llt.solve(c.asDiagonal() * Pp).transpose();
        }
        const Vector v = y.col(t - 1) - c.cwiseProduct(mp);
        m = mp + K * v;
        res.loglik += -0.5 * (static_cast<double>(d) * kLog2Pi + logdetS + v.dot(S_llt.solve(v)));
        res.pred_mean.push_back(mp);
        res.filt_mean.push_back(m);
        if (!steady) {
            // Joseph form.
            const Matrix IKH = I - K * c.asDiagonal();
            Matrix Pn = IKH * Pp * IKH.transpose();
            Pn.noalias() += K * theta.tau.asDiagonal() * K.transpose();
            detail::symmetrize(Pn);
            res.pred_cov_store.push_back(Pp);
            res.filt_cov_store.push_back(Pn);
            if (t > 1 && detail::converged(Pn, P, steady_tol)) {
                steady = true;
                res.steady_from = t;
            }
            P = std::move(Pn);
        }
        if (!std::isfinite(res.loglik)) throw Error("kalman_filter: non-finite log-likelihood");
    }
    if (!steady) res.steady_from = T;
    return res;
}

namespace detail {

// Backward gain J_t = P_f(t) F' P_p(t+1)^{-1}, together with the factorization of P_p(t+1).
inline Matrix backward_gain(const FilterResult& f, const Matrix& F, Index t) {
    const Matrix& Pf = f.filt_cov(t);
    const Matrix& Pp = f.pred_cov(t + 1);
    Eigen::LLT<Matrix> llt(Pp);
    // J' = Pp^{-1} F Pf
    return llt.solve(F * Pf).transpose();
}

}  // namespace detail

inline SmootherResult kalman_smoother(const Matrix& y, const ModelParams& theta, double steady_tol = kSteadyTol) {
    const FilterResult f = kalman_filter(y, theta, steady_tol);
    const Index d = theta.d();
    const Index T = y.cols();
    const Matrix F = theta.transition();

    SmootherResult s;
    s.loglik = f.loglik;
    s.smooth_mean.assign(static_cast<size_t>(T + 1), Vector());
    s.smooth_cov.assign(static_cast<size_t>(T + 1), Matrix());
    s.crosscov.assign(static_cast<size_t>(T + 1), Matrix::Zero(d, d));
    s.smooth_mean[static_cast<size_t>(T)] = f.filt_mean[static_cast<size_t>(T)];
    s.smooth_cov[static_cast<size_t>(T)] = f.filt_cov(T);

    Matrix J_steady;
    bool have_steady_gain = false;
    bool cov_frozen = false;
    for (Index t = T - 1; t >= 0; --t) {
        const bool in_steady = t >= f.steady_from;
        Matrix J;
        if (in_steady) {
            if (!have_steady_gain) {
                J_steady = detail::backward_gain(f, F, t);
                have_steady_gain = true;
            }
            J = J_steady;
        } else {
            J = detail::backward_gain(f, F, t);
            cov_frozen = false;
        }
        const size_t ts = static_cast<size_t>(t);
        const Vector& mnext = s.smooth_mean[ts + 1];
        s.smooth_mean[ts] = f.filt_mean[ts] + J * (mnext - f.pred_mean[ts + 1]);
        if (cov_frozen) {
            s.smooth_cov[ts] = s.smooth_cov[ts + 1];
        } else {
            Matrix Ps = f.filt_cov(t);
            Ps.noalias() += J * (s.smooth_cov[ts + 1] - f.pred_cov(t + 1)) * J.transpose();
            detail::symmetrize(Ps);
            if (in_steady && detail::converged(Ps, s.smooth_cov[ts + 1], steady_tol)) cov_frozen = true;
            s.smooth_cov[ts] = std::move(Ps);
        }
        s.crosscov[ts + 1].noalias() = s.smooth_cov[ts + 1] * J.transpose();
    }
    return s;
}

// One exact joint draw of x(0..T) from p(X | Y, theta).
inline LatentStates ffbs_sample(const Matrix& y, const ModelParams& theta, Rng& rng,
                                double steady_tol = kSteadyTol) {
    const FilterResult f = kalman_filter(y, theta, steady_tol);
    const Index d = theta.d();
    const Index T = y.cols();
    const Matrix F = theta.transition();

    LatentStates x(d, T + 1);
    {
        const Matrix L = detail::psd_factor(f.filt_cov(T));
        x.col(T) = f.filt_mean[static_cast<size_t>(T)] + L * rng.normal_vector(d);
    }
    Matrix J_steady, L_steady;
    bool have_steady = false;
    for (Index t = T - 1; t >= 0; --t) {
        const Matrix* J;
        const Matrix* L;
        Matrix J_local, L_local;
        auto factor = [&](Matrix& Jout, Matrix& Lout) {
            Jout = detail::backward_gain(f, F, t);
            Matrix C = f.filt_cov(t) - Jout * F * f.filt_cov(t);
            detail::symmetrize(C);
            Lout = detail::psd_factor(C);
        };
        if (t >= f.steady_from) {
            if (!have_steady) {
                factor(J_steady, L_steady);
                have_steady = true;
            }
            J = &J_steady;
            L = &L_steady;
        } else {
            factor(J_local, L_local);
            J = &J_local;
            L = &L_local;
        }
        const size_t ts = static_cast<size_t>(t);
        const Vector mean = f.filt_mean[ts] + (*J) * (x.col(t + 1) - f.pred_mean[ts + 1]);
        x.col(t) = mean + (*L) * rng.normal_vector(d);
    }
    return x;
}

}  // namespace ssmar
