#pragma once

// MAP-EM for the state-space model with X treated as missing data. Starts from d singleton
// clusters; the number of distinct labels left at convergence is the selected K.
//
// Continuous coordinates get exact conditional maximizers of Q(theta | theta_old) + log p(theta);
// discrete coordinates (Gamma, m) get one best-response (ICM) pass per iteration. Every update is
// a coordinate ascent step, so log p(Y | theta) + log p(theta) never decreases.

#include "ssmar/core.hpp"
#include "ssmar/density.hpp"
#include "ssmar/sampler.hpp"
#include "ssmar/statespace.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace ssmar {

struct EmConfig {
    int max_iter = 200;
    double tol = 1e-6;          // relative objective change
    double b_margin = 1e-3;     // B is kept inside [margin, u0] and [l0, 1 - margin]
};

struct EmResult {
    ModelParams theta;           // labels compacted to 0..K_selected-1
    Hyperparams h;               // hyperparameters matching K_selected
    Index K_selected = 0;
    std::vector<double> trace;   // penalized objective, entry 0 is the initializer
    int iterations = 0;
    bool converged = false;
};

// Deterministic starting point with K = d singleton clusters.
inline ModelParams initial_params(const Matrix& y, const Hyperparams& h) {
    const Index d = y.rows();
    const Index T = y.cols();
    if (d < 1 || T < 2) throw Error("initial_params: need at least one channel and two time points");
    if (!y.allFinite()) throw Error("initial_params: Y contains non-finite values");

    ModelParams s;
    s.c.resize(d);
    s.tau.resize(d);
    s.mu.resize(d);
    Matrix z(d, T);
    for (Index i = 0; i < d; ++i) {
        const double mean = y.row(i).mean();
        const double var = (y.row(i).array() - mean).square().sum() / static_cast<double>(T - 1);
        if (!(var > 0.0)) throw Error("initial_params: channel " + std::to_string(i + 1) + " has zero variance");
        const double sd = std::sqrt(var);
        s.c(i) = sd;
        s.tau(i) = 0.1 * var;
        s.mu(i) = y(i, 0) / sd;
        z.row(i) = (y.row(i).array() - mean) / sd;
    }

    const auto lag = z.leftCols(T - 1);
    const auto cur = z.rightCols(T - 1);
    Matrix G = lag * lag.transpose();
    const double ridge = 1e-8 * std::max(1.0, G.trace() / static_cast<double>(d));
    G.diagonal().array() += ridge;
    const Matrix C = cur * lag.transpose();
    s.A = G.ldlt().solve(C.transpose()).transpose();

    s.gamma = IMatrix::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
        std::vector<double> mag(static_cast<size_t>(d));
        for (Index j = 0; j < d; ++j) mag[static_cast<size_t>(j)] = std::abs(s.A(i, j));
        std::vector<double> sorted = mag;
        std::nth_element(sorted.begin(), sorted.begin() + d / 2, sorted.end());
        double median = sorted[static_cast<size_t>(d / 2)];
        if (d % 2 == 0) {
            const double lower = *std::max_element(sorted.begin(), sorted.begin() + d / 2);
            median = 0.5 * (median + lower);
        }
        for (Index j = 0; j < d; ++j) s.gamma(i, j) = mag[static_cast<size_t>(j)] > median ? 1 : 0;
    }

    s.m.resize(static_cast<size_t>(d));
    for (Index i = 0; i < d; ++i) s.m[static_cast<size_t>(i)] = static_cast<int>(i);
    s.B = Matrix::Constant(d, d, 0.5 * h.u0);
    s.B.diagonal().setConstant(0.5 * (h.l0 + 1.0));
    s.p = Vector::Constant(d, 1.0 / static_cast<double>(d));
    return s;
}

// log p(Y | theta) + log p(theta)
inline double penalized_objective(const Matrix& y, const ModelParams& theta, const Hyperparams& h) {
    const double lp = log_prior(theta, h);
    if (!std::isfinite(lp)) return lp;
    return kalman_filter(y, theta).loglik + lp;
}

namespace detail {

struct EStepMoments {
    Matrix S00;  // sum_{t=0}^{T-1} E[x(t) x(t)']
    Matrix S11;  // sum_{t=1}^{T}   E[x(t) x(t)']
    Matrix S10;  // sum_{t=1}^{T}   E[x(t) x(t-1)']
    Vector sxy;  // sum_t y_i(t) E[x_i(t)]
    Vector x0_mean;
};

inline EStepMoments e_step(const Matrix& y, const ModelParams& theta) {
    const SmootherResult sm = kalman_smoother(y, theta);
    const Index d = theta.d();
    const Index T = y.cols();
    Matrix M(d, T + 1);
    for (Index t = 0; t <= T; ++t) M.col(t) = sm.smooth_mean[static_cast<size_t>(t)];
    EStepMoments e;
    const auto lag = M.leftCols(T);
    const auto cur = M.rightCols(T);
    e.S00.noalias() = lag * lag.transpose();
    e.S11.noalias() = cur * cur.transpose();
    e.S10.noalias() = cur * lag.transpose();
    for (Index t = 0; t < T; ++t) e.S00 += sm.smooth_cov[static_cast<size_t>(t)];
    for (Index t = 1; t <= T; ++t) {
        e.S11 += sm.smooth_cov[static_cast<size_t>(t)];
        e.S10 += sm.crosscov[static_cast<size_t>(t)];
    }
    e.sxy.resize(d);
    for (Index i = 0; i < d; ++i) e.sxy(i) = y.row(i).dot(cur.row(i));
    e.x0_mean = M.col(0);
    return e;
}

inline void m_step_edges(const EStepMoments& e, ModelParams& s, const Hyperparams& h) {
    const Index d = s.d();
    const double prior_prec = 1.0 / (h.xi0 * h.xi0);
    Vector f(d), u(d);
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) f(j) = s.gamma(i, j) ? s.A(i, j) : 0.0;
        u.noalias() = e.S00 * f;
        const int mi = s.m[static_cast<size_t>(i)];
        for (Index j = 0; j < d; ++j) {
            const double hjj = e.S00(j, j) + prior_prec;
            const double g = e.S10(i, j) - (u(j) - f(j) * e.S00(j, j));
            const double q = s.B(mi, s.m[static_cast<size_t>(j)]);
            const double gain = g * g / (2.0 * hjj) + std::log(q) - std::log1p(-q);
            int on = s.gamma(i, j);
            if (gain > 0.0) on = 1;
            else if (gain < 0.0) on = 0;
            const double fn = on ? g / hjj : 0.0;
            s.gamma(i, j) = on;
            s.A(i, j) = fn;
            if (fn != f(j)) {
                u += (fn - f(j)) * e.S00.col(j);
                f(j) = fn;
            }
        }
        // Joint ridge refit over the active set.
        std::vector<Index> active;
        for (Index j = 0; j < d; ++j)
            if (s.gamma(i, j)) active.push_back(j);
        if (active.empty()) continue;
        const Index n = static_cast<Index>(active.size());
        Matrix H(n, n);
        Vector b(n);
        for (Index a = 0; a < n; ++a) {
            b(a) = e.S10(i, active[static_cast<size_t>(a)]);
            for (Index c = 0; c < n; ++c) H(a, c) = e.S00(active[static_cast<size_t>(a)], active[static_cast<size_t>(c)]);
            H(a, a) += prior_prec;
        }
        const Vector sol = H.llt().solve(b);
        for (Index a = 0; a < n; ++a) s.A(i, active[static_cast<size_t>(a)]) = sol(a);
    }
}

// Bernoulli log-likelihood of one block with its probability at the box-constrained MAP.
inline double block_profile(double n1, double n0, bool diagonal, const Hyperparams& h, double margin) {
    const double n = n1 + n0;
    if (n == 0.0) return 0.0;
    const double lo = diagonal ? h.l0 : margin;
    const double hi = diagonal ? 1.0 - margin : h.u0;
    const double b = std::clamp(n1 / n, lo, hi);
    return xlogy(n1, b) + xlog1my(n0, b);
}

// ICM over labels with B profiled out: each node takes the label maximizing
// log p_k + max_B log p(Gamma | m, B). Ties keep the current label.
inline void m_step_labels(ModelParams& s, const Hyperparams& h, double margin) {
    const Index d = s.d();
    const Index K = s.K();
    Matrix n1 = Matrix::Zero(K, K), n0 = Matrix::Zero(K, K);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            (s.gamma(i, j) ? n1 : n0)(s.m[static_cast<size_t>(i)], s.m[static_cast<size_t>(j)]) += 1.0;
    Matrix prof(K, K);
    auto refresh = [&](Index a, Index b) { prof(a, b) = block_profile(n1(a, b), n0(a, b), a == b, h, margin); };
    for (Index a = 0; a < K; ++a)
        for (Index b = 0; b < K; ++b) refresh(a, b);

    // Counts of node i's pairs by the other endpoint's label, excluding the self pair.
    Vector out1(K), out0(K), in1(K), in0(K);
    for (Index i = 0; i < d; ++i) {
        const int cur = s.m[static_cast<size_t>(i)];
        out1.setZero();
        out0.setZero();
        in1.setZero();
        in0.setZero();
        for (Index l = 0; l < d; ++l) {
            if (l == i) continue;
            const int ml = s.m[static_cast<size_t>(l)];
            (s.gamma(i, l) ? out1 : out0)(ml) += 1.0;
            (s.gamma(l, i) ? in1 : in0)(ml) += 1.0;
        }
        const int gii = s.gamma(i, i);
        auto shift = [&](int k, double w) {
            n1.row(k) += w * out1.transpose();
            n0.row(k) += w * out0.transpose();
            n1.col(k) += w * in1;
            n0.col(k) += w * in0;
            (gii ? n1 : n0)(k, k) += w;
        };
        auto cross = [&](int k) {  // sum of the profile over row k and column k
            return prof.row(k).sum() + prof.col(k).sum() - prof(k, k);
        };
        auto refresh_cross = [&](int k) {
            for (Index b = 0; b < K; ++b) {
                refresh(k, b);
                refresh(b, k);
            }
        };
        shift(cur, -1.0);
        refresh_cross(cur);
        int best = cur;
        double best_val = kNegInf;
        for (int k = 0; k < K; ++k) {
            if (!(s.p(k) > 0.0)) continue;
            const double before = cross(k);
            shift(k, 1.0);
            double after = 0.0;
            for (Index b = 0; b < K; ++b) {
                after += block_profile(n1(k, b), n0(k, b), k == b, h, margin);
                if (b != k) after += block_profile(n1(b, k), n0(b, k), false, h, margin);
            }
            shift(k, -1.0);
            const double v = std::log(s.p(k)) + after - before;
            if (v > best_val || (v == best_val && k == cur)) {
                best_val = v;
                best = k;
            }
        }
        s.m[static_cast<size_t>(i)] = best;
        shift(best, 1.0);
        refresh_cross(best);
    }
}

// Greedy cluster merges, each accepted only if it raises the profiled objective
// max_{B,p} [log p(Gamma | m, B) + log p(m | p) + log p(p)]. Repeats until no merge helps.
inline void m_step_merge(ModelParams& s, const Hyperparams& h, double margin) {
    const Index K = s.K();
    const double alpha = h.alpha.mean();
    auto weight_profile = [&](const Vector& n) {
        Vector w = (n.array() + alpha - 1.0).cwiseMax(0.0);
        const double W = w.sum();
        double v = 0.0;
        for (Index k = 0; k < w.size(); ++k) v += xlogy(w(k), w(k) / W);
        return v;
    };
    while (true) {
        Matrix n1 = Matrix::Zero(K, K), n0 = Matrix::Zero(K, K);
        for (Index i = 0; i < s.d(); ++i)
            for (Index j = 0; j < s.d(); ++j)
                (s.gamma(i, j) ? n1 : n0)(s.m[static_cast<size_t>(i)], s.m[static_cast<size_t>(j)]) += 1.0;
        const Vector counts = label_counts(s);
        const double base_w = weight_profile(counts);
        double best_gain = 0.0;
        Index ba = -1, bb = -1;
        for (Index a = 0; a < K; ++a) {
            if (counts(a) == 0.0) continue;
            for (Index b = a + 1; b < K; ++b) {
                if (counts(b) == 0.0) continue;
                double before = 0.0, after = 0.0;
                for (Index c = 0; c < K; ++c) {
                    for (Index e : {a, b}) {
                        before += block_profile(n1(e, c), n0(e, c), e == c, h, margin);
                        if (c != a && c != b) before += block_profile(n1(c, e), n0(c, e), false, h, margin);
                    }
                    if (c == a || c == b) continue;
                    after += block_profile(n1(a, c) + n1(b, c), n0(a, c) + n0(b, c), false, h, margin);
                    after += block_profile(n1(c, a) + n1(c, b), n0(c, a) + n0(c, b), false, h, margin);
                }
                after += block_profile(n1(a, a) + n1(a, b) + n1(b, a) + n1(b, b), n0(a, a) + n0(a, b) + n0(b, a) + n0(b, b),
                                       true, h, margin);
                Vector merged = counts;
                merged(a) += merged(b);
                merged(b) = 0.0;
                const double gain = after - before + weight_profile(merged) - base_w;
                if (gain > best_gain) {
                    best_gain = gain;
                    ba = a;
                    bb = b;
                }
            }
        }
        if (ba < 0) return;
        for (auto& k : s.m)
            if (k == bb) k = static_cast<int>(ba);
    }
}

inline void m_step_blocks(ModelParams& s, const Hyperparams& h, double margin) {
    const BlockCounts bc = block_counts(s);
    for (Index a = 0; a < s.K(); ++a)
        for (Index b = 0; b < s.K(); ++b) {
            const int n = bc.present(a, b) + bc.absent(a, b);
            if (n == 0) continue;
            const double lo = a == b ? h.l0 : margin;
            const double hi = a == b ? 1.0 - margin : h.u0;
            s.B(a, b) = std::clamp(static_cast<double>(bc.present(a, b)) / n, lo, hi);
        }
}

inline void m_step_weights(ModelParams& s, const Hyperparams& h) {
    const Vector n = label_counts(s);
    Vector w = (n + h.alpha).array() - 1.0;
    w = w.cwiseMax(0.0);
    s.p = w / w.sum();
}

inline void m_step_observation(const Matrix& y, const EStepMoments& e, ModelParams& s, const Hyperparams& h) {
    const Index T = y.cols();
    const double v1 = h.xi1 * h.xi1;
    for (Index i = 0; i < s.d(); ++i) {
        const double sxx = e.S11(i, i);
        const double sxy = e.sxy(i);
        const double syy = y.row(i).squaredNorm();
        s.c(i) = (sxy / s.tau(i)) / (sxx / s.tau(i) + 1.0 / v1);
        const double ssr = std::max(0.0, syy - 2.0 * s.c(i) * sxy + s.c(i) * s.c(i) * sxx);
        s.tau(i) = (0.5 * ssr + h.rho0) / (0.5 * static_cast<double>(T) + 1.0 + h.rho0);
        s.mu(i) = e.x0_mean(i) * v1 / (1.0 + v1);
    }
}

}  // namespace detail

// Relabel clusters densely in order of first appearance and drop empty ones.
inline ModelParams compact_labels(const ModelParams& s) {
    std::map<int, int> remap;
    for (int k : s.m)
        if (!remap.count(k)) remap.emplace(k, static_cast<int>(remap.size()));
    std::vector<int> order(remap.size());
    for (const auto& [old, nu] : remap) order[static_cast<size_t>(nu)] = old;
    const Index K = static_cast<Index>(order.size());
    ModelParams out = s;
    out.B.resize(K, K);
    out.p.resize(K);
    for (Index a = 0; a < K; ++a) {
        out.p(a) = s.p(order[static_cast<size_t>(a)]);
        for (Index b = 0; b < K; ++b) out.B(a, b) = s.B(order[static_cast<size_t>(a)], order[static_cast<size_t>(b)]);
    }
    out.p /= out.p.sum();
    for (auto& k : out.m) k = remap.at(k);
    return out;
}

// One EM iteration (E-step at theta, then the coordinate-ascent M-step).
inline void em_iteration(const Matrix& y, ModelParams& theta, const Hyperparams& h, double b_margin = 1e-3) {
    const detail::EStepMoments e = detail::e_step(y, theta);
    detail::m_step_labels(theta, h, b_margin);
    detail::m_step_merge(theta, h, b_margin);
    detail::m_step_blocks(theta, h, b_margin);
    detail::m_step_weights(theta, h);
    detail::m_step_edges(e, theta, h);
    detail::m_step_observation(y, e, theta, h);
}

inline EmResult em_fit(const Matrix& y, const Hyperparams& h, const EmConfig& cfg = {}) {
    const Index d = y.rows();
    if (d < 2) throw Error("em_fit: need at least 2 channels");
    if (cfg.max_iter < 1) throw Error("em_fit: max_iter must be at least 1");
    if (!y.allFinite()) throw Error("em_fit: Y contains non-finite values");

    Hyperparams he = h;
    he.alpha = Vector::Constant(d, h.alpha.size() > 0 ? h.alpha.mean() : 1.0);
    validate_hyperparams(he);

    EmResult res;
    ModelParams theta = initial_params(y, he);
    double obj = penalized_objective(y, theta, he);
    res.trace.push_back(obj);
    for (int it = 0; it < cfg.max_iter; ++it) {
        em_iteration(y, theta, he, cfg.b_margin);
        const double next = penalized_objective(y, theta, he);
        res.trace.push_back(next);
        res.iterations = it + 1;
        const double change = std::abs(next - obj);
        obj = next;
        if (change < cfg.tol * std::max(1.0, std::abs(obj))) {
            res.converged = true;
            break;
        }
    }
    res.theta = compact_labels(theta);
    res.K_selected = res.theta.K();
    res.h = h;
    res.h.alpha = Vector::Constant(res.K_selected, he.alpha(0));
    return res;
}

}  // namespace ssmar
