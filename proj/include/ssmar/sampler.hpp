#pragma once

// Partially collapsed Gibbs sampler over (X, Gamma, A, m, B, p, c, tau, mu).

#include "ssmar/core.hpp"
#include "ssmar/density.hpp"
#include "ssmar/random.hpp"
#include "ssmar/statespace.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssmar {

struct ChainConfig {
    int n_iter = 10000;
    int n_burnin = 5000;
    int thin = 1;
    std::uint64_t seed = 1;
    int max_traced_A = 100;  // A entries kept in the diagnostic trace
};

inline void validate_chain_config(const ChainConfig& cfg) {
    if (cfg.n_iter < 1) throw Error("n_iter must be positive");
    if (cfg.n_burnin < 0) throw Error("n_burnin must be nonnegative");
    if (cfg.n_burnin >= cfg.n_iter) throw Error("n_burnin must be smaller than n_iter");
    if (cfg.thin < 1) throw Error("thin must be positive");
}

struct ChainOutput {
    IMatrix gamma_sum;
    IMatrix same_cluster_sum;
    int n_retained = 0;
    std::vector<std::string> trace_names;
    Matrix traces;  // one row per retained draw, one column per traced scalar
};

// ---------------------------------------------------------------------------------------------
// (gamma_ij, A_ij)

struct EdgeConditional {
    double log_odds;   // log P(gamma=1 | rest) - log P(gamma=0 | rest), with A_ij integrated out
    double post_mean;  // A_ij | gamma=1
    double post_var;
};

inline EdgeConditional edge_conditional(double s_xx, double s_xr, double q, double xi0) {
    const double v0 = xi0 * xi0;
    EdgeConditional e{};
    const double prior_lo = std::log(q) - std::log1p(-q);
    e.log_odds = prior_lo - 0.5 * std::log1p(v0 * s_xx) + v0 * s_xr * s_xr / (2.0 * (1.0 + v0 * s_xx));
    const double prec = s_xx + 1.0 / v0;
    e.post_mean = s_xr / prec;
    e.post_var = 1.0 / prec;
    return e;
}

namespace detail {

inline void draw_edge(const EdgeConditional& e, double q, double xi0, int& g, double& a, Rng& rng) {
    if (q >= 1.0) {
        g = 1;
    } else if (q <= 0.0) {
        g = 0;
    } else {
        const double p1 = 1.0 / (1.0 + std::exp(-e.log_odds));
        g = rng.uniform() < p1 ? 1 : 0;
    }
    a = g ? rng.normal(e.post_mean, std::sqrt(e.post_var)) : rng.normal(0.0, xi0);
}

inline int label(const ModelParams& s, Index i) { return s.m[static_cast<size_t>(i)]; }

}  // namespace detail

// Sufficient statistics for pair (i,j): S_xx = sum_t x_j(t-1)^2 and S_xr = sum_t x_j(t-1) r_i(t),
// with r_i the state residual of row i excluding the j term.
inline std::pair<double, double> edge_statistics(Index i, Index j, const LatentStates& x, const ModelParams& s) {
    const Index T = x.cols() - 1;
    const Index d = s.d();
    double sxx = 0.0, sxr = 0.0;
    for (Index t = 1; t <= T; ++t) {
        double r = x(i, t);
        for (Index l = 0; l < d; ++l)
            if (l != j && s.gamma(i, l)) r -= s.A(i, l) * x(l, t - 1);
        const double xj = x(j, t - 1);
        sxx += xj * xj;
        sxr += xj * r;
    }
    return {sxx, sxr};
}

inline void sample_edge_and_weight(Index i, Index j, const LatentStates& x, ModelParams& s, const Hyperparams& h,
                                   Rng& rng) {
    const auto [sxx, sxr] = edge_statistics(i, j, x, s);
    const double q = s.B(detail::label(s, i), detail::label(s, j));
    const EdgeConditional e = edge_conditional(sxx, sxr, q, h.xi0);
    int g;
    double a;
    detail::draw_edge(e, q, h.xi0, g, a, rng);
    s.gamma(i, j) = g;
    s.A(i, j) = a;
}

// Row-major sweep over all (i,j) using lagged Gram matrices, O(d^2 T + d^3).
inline void sample_edges(const LatentStates& x, ModelParams& s, const Hyperparams& h, Rng& rng) {
    const Index d = s.d();
    const Index T = x.cols() - 1;
    const auto lag = x.leftCols(T);
    const auto cur = x.rightCols(T);
    Matrix G(d, d);
    G.noalias() = lag * lag.transpose();
    Matrix C(d, d);
    C.noalias() = cur * lag.transpose();

    Vector f(d), u(d);
    for (Index i = 0; i < d; ++i) {
        for (Index l = 0; l < d; ++l) f(l) = s.gamma(i, l) ? s.A(i, l) : 0.0;
        u.noalias() = G * f;
        const int mi = detail::label(s, i);
        for (Index j = 0; j < d; ++j) {
            const double sxx = G(j, j);
            const double sxr = C(i, j) - u(j) + f(j) * G(j, j);
            const double q = s.B(mi, detail::label(s, j));
            const EdgeConditional e = edge_conditional(sxx, sxr, q, h.xi0);
            int g;
            double a;
            detail::draw_edge(e, q, h.xi0, g, a, rng);
            s.gamma(i, j) = g;
            s.A(i, j) = a;
            const double fn = g ? a : 0.0;
            if (fn != f(j)) {
                u += (fn - f(j)) * G.col(j);
                f(j) = fn;
            }
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Cluster labels

// Normalized log conditional pmf of m_i over the K labels, other labels fixed.
inline Vector cluster_label_logpmf(Index i, const ModelParams& s) {
    const Index d = s.d();
    const Index K = s.K();
    Vector out1 = Vector::Zero(K), out0 = Vector::Zero(K), in1 = Vector::Zero(K), in0 = Vector::Zero(K);
    for (Index j = 0; j < d; ++j) {
        if (j == i) continue;
        const int mj = detail::label(s, j);
        (s.gamma(i, j) ? out1 : out0)(mj) += 1.0;
        (s.gamma(j, i) ? in1 : in0)(mj) += 1.0;
    }
    Vector lp(K);
    const int gii = s.gamma(i, i);
    for (Index k = 0; k < K; ++k) {
        double v = std::log(s.p(k));
        for (Index l = 0; l < K; ++l) {
            v += xlogy(out1(l), s.B(k, l)) + xlog1my(out0(l), s.B(k, l));
            v += xlogy(in1(l), s.B(l, k)) + xlog1my(in0(l), s.B(l, k));
        }
        v += gii ? std::log(s.B(k, k)) : std::log1p(-s.B(k, k));
        lp(k) = v;
    }
    const double mx = lp.maxCoeff();
    if (!std::isfinite(mx)) throw Error("cluster_label_logpmf: every label has zero probability");
    const double lse = mx + std::log((lp.array() - mx).exp().sum());
    return lp.array() - lse;
}

inline void sample_cluster_labels(ModelParams& s, const Hyperparams& /*h*/, Rng& rng) {
    if (s.K() == 1) {
        std::fill(s.m.begin(), s.m.end(), 0);
        return;
    }
    for (Index i = 0; i < s.d(); ++i) s.m[static_cast<size_t>(i)] = static_cast<int>(rng.categorical_log(cluster_label_logpmf(i, s)));
}

// ---------------------------------------------------------------------------------------------
// Block probabilities

struct BlockCounts {
    IMatrix present;  // n1(k1,k2)
    IMatrix absent;   // n0(k1,k2)
};

inline BlockCounts block_counts(const ModelParams& s) {
    const Index K = s.K();
    BlockCounts bc{IMatrix::Zero(K, K), IMatrix::Zero(K, K)};
    for (Index i = 0; i < s.d(); ++i)
        for (Index j = 0; j < s.d(); ++j) {
            const int a = detail::label(s, i), b = detail::label(s, j);
            if (s.gamma(i, j))
                ++bc.present(a, b);
            else
                ++bc.absent(a, b);
        }
    return bc;
}

inline std::pair<double, double> block_interval(Index k1, Index k2, const Hyperparams& h) {
    return k1 == k2 ? std::pair{h.l0, 1.0} : std::pair{0.0, h.u0};
}

// Beta(1+n1, 1+n0) truncated to the prior interval; an empty block falls back to the uniform prior.
inline void sample_block_probs(ModelParams& s, const Hyperparams& h, Rng& rng) {
    const BlockCounts bc = block_counts(s);
    for (Index a = 0; a < s.K(); ++a)
        for (Index b = 0; b < s.K(); ++b) {
            const auto [lo, hi] = block_interval(a, b, h);
            s.B(a, b) = sample_truncated_beta(1.0 + bc.present(a, b), 1.0 + bc.absent(a, b), lo, hi, rng);
        }
}

// ---------------------------------------------------------------------------------------------
// Cluster weights

inline Vector label_counts(const ModelParams& s) {
    Vector n = Vector::Zero(s.K());
    for (int k : s.m) n(k) += 1.0;
    return n;
}

inline void sample_cluster_weights(ModelParams& s, const Hyperparams& h, Rng& rng) {
    if (s.K() == 1) {
        s.p = Vector::Ones(1);
        return;
    }
    s.p = rng.dirichlet(h.alpha + label_counts(s));
}

// ---------------------------------------------------------------------------------------------
// Observation parameters

struct NormalParams {
    double mean;
    double var;
};

struct InverseGammaParams {
    double shape;
    double scale;
};

inline NormalParams gain_conditional(Index i, const Matrix& y, const LatentStates& x, double tau_i,
                                     const Hyperparams& h) {
    const Index T = y.cols();
    const auto xi = x.row(i).tail(T);
    const double sxx = xi.squaredNorm();
    const double sxy = xi.dot(y.row(i));
    const double var = 1.0 / (sxx / tau_i + 1.0 / (h.xi1 * h.xi1));
    return {var * sxy / tau_i, var};
}

inline InverseGammaParams noise_conditional(Index i, const Matrix& y, const LatentStates& x, double c_i,
                                            const Hyperparams& h) {
    const Index T = y.cols();
    const double ss = (y.row(i) - c_i * x.row(i).tail(T)).squaredNorm();
    return {h.rho0 + 0.5 * static_cast<double>(T), h.rho0 + 0.5 * ss};
}

inline NormalParams initial_mean_conditional(double x0_i, const Hyperparams& h) {
    const double v1 = h.xi1 * h.xi1;
    return {x0_i * v1 / (1.0 + v1), v1 / (1.0 + v1)};
}

inline void sample_observation_params(const Matrix& y, const LatentStates& x, ModelParams& s, const Hyperparams& h,
                                      Rng& rng) {
    for (Index i = 0; i < s.d(); ++i) {
        const NormalParams cp = gain_conditional(i, y, x, s.tau(i), h);
        s.c(i) = rng.normal(cp.mean, std::sqrt(cp.var));
        const InverseGammaParams tp = noise_conditional(i, y, x, s.c(i), h);
        s.tau(i) = rng.inverse_gamma(tp.shape, tp.scale);
        const NormalParams mp = initial_mean_conditional(x(i, 0), h);
        s.mu(i) = rng.normal(mp.mean, std::sqrt(mp.var));
    }
}

// ---------------------------------------------------------------------------------------------

// One full sweep; returns the X draw used for the parameter updates.
inline LatentStates gibbs_step(const Matrix& y, ModelParams& s, const Hyperparams& h, Rng& rng) {
    LatentStates x = ffbs_sample(y, s, rng);
    sample_edges(x, s, h, rng);
    sample_cluster_labels(s, h, rng);
    sample_block_probs(s, h, rng);
    sample_cluster_weights(s, h, rng);
    sample_observation_params(y, x, s, h, rng);
    return x;
}

// Draw theta from the prior with K clusters.
inline ModelParams sample_prior(Index d, const Hyperparams& h, Rng& rng) {
    const Index K = h.K();
    ModelParams s;
    s.p = K == 1 ? Vector::Ones(1) : rng.dirichlet(h.alpha);
    s.m.resize(static_cast<size_t>(d));
    const Vector logp = s.p.array().log();
    for (auto& k : s.m) k = static_cast<int>(rng.categorical_log(logp));
    s.B.resize(K, K);
    for (Index a = 0; a < K; ++a)
        for (Index b = 0; b < K; ++b) {
            const auto [lo, hi] = block_interval(a, b, h);
            s.B(a, b) = rng.uniform(lo, hi);
        }
    s.gamma.resize(d, d);
    s.A.resize(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) {
            s.gamma(i, j) = rng.bernoulli(s.B(s.m[static_cast<size_t>(i)], s.m[static_cast<size_t>(j)])) ? 1 : 0;
            s.A(i, j) = rng.normal(0.0, h.xi0);
        }
    s.c.resize(d);
    s.mu.resize(d);
    s.tau.resize(d);
    for (Index i = 0; i < d; ++i) {
        s.c(i) = rng.normal(0.0, h.xi1);
        s.mu(i) = rng.normal(0.0, h.xi1);
        s.tau(i) = rng.inverse_gamma(h.rho0, h.rho0);
    }
    return s;
}

// Draw (X, Y) given theta over T observation times.
inline std::pair<LatentStates, Matrix> simulate_states(const ModelParams& s, Index T, Rng& rng) {
    const Index d = s.d();
    const Matrix F = s.transition();
    LatentStates x(d, T + 1);
    x.col(0) = s.mu + rng.normal_vector(d);
    for (Index t = 1; t <= T; ++t) x.col(t) = F * x.col(t - 1) + rng.normal_vector(d);
    Matrix y(d, T);
    for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < d; ++i) y(i, t) = s.c(i) * x(i, t + 1) + rng.normal(0.0, std::sqrt(s.tau(i)));
    return {x, y};
}

// ---------------------------------------------------------------------------------------------

namespace detail {

struct TraceLayout {
    std::vector<std::string> names;
    std::vector<std::pair<Index, Index>> a_entries;
};

inline TraceLayout trace_layout(Index d, Index K, int max_a) {
    TraceLayout tl;
    const Index total = d * d;
    const Index n_a = std::min<Index>(total, std::max(0, max_a));
    for (Index k = 0; k < n_a; ++k) {
        const Index flat = n_a == total ? k : (k * total) / n_a;
        tl.a_entries.emplace_back(flat / d, flat % d);
    }
    for (const auto& [i, j] : tl.a_entries)
        tl.names.push_back("A[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
    for (Index a = 0; a < K; ++a)
        for (Index b = 0; b < K; ++b)
            tl.names.push_back("B[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]");
    for (Index i = 0; i < d; ++i) tl.names.push_back("c[" + std::to_string(i + 1) + "]");
    for (Index i = 0; i < d; ++i) tl.names.push_back("tau[" + std::to_string(i + 1) + "]");
    return tl;
}

inline Vector trace_row(const TraceLayout& tl, const ModelParams& s) {
    Vector row(static_cast<Index>(tl.names.size()));
    Index c = 0;
    for (const auto& [i, j] : tl.a_entries) row(c++) = s.A(i, j);
    for (Index a = 0; a < s.K(); ++a)
        for (Index b = 0; b < s.K(); ++b) row(c++) = s.B(a, b);
    for (Index i = 0; i < s.d(); ++i) row(c++) = s.c(i);
    for (Index i = 0; i < s.d(); ++i) row(c++) = s.tau(i);
    return row;
}

}  // namespace detail

inline ChainOutput run_chain(const Matrix& y, const ModelParams& init, const ChainConfig& cfg, const Hyperparams& h) {
    validate_chain_config(cfg);
    validate_hyperparams(h);
    check_dimensions(init);
    const Index d = init.d();
    if (y.rows() != d) throw Error("run_chain: Y has " + std::to_string(y.rows()) + " channels but theta has " +
                                   std::to_string(d));
    if (y.cols() < 1) throw Error("run_chain: Y has no time points");
    if (!y.allFinite()) throw Error("run_chain: Y contains non-finite values");
    if (h.K() != init.K()) throw Error("run_chain: alpha length must equal K of the initial state");
    if (const std::string v = support_violation(init, h); !v.empty()) throw Error("run_chain: initial state invalid: " + v);

    Rng rng(cfg.seed);
    ModelParams s = init;
    ChainOutput out;
    out.gamma_sum = IMatrix::Zero(d, d);
    out.same_cluster_sum = IMatrix::Zero(d, d);
    const detail::TraceLayout tl = detail::trace_layout(d, s.K(), cfg.max_traced_A);
    out.trace_names = tl.names;
    const int n_keep = (cfg.n_iter - cfg.n_burnin + cfg.thin - 1) / cfg.thin;
    out.traces.resize(n_keep, static_cast<Index>(tl.names.size()));

    for (int it = 0; it < cfg.n_iter; ++it) {
        gibbs_step(y, s, h, rng);
        const int post = it - cfg.n_burnin;
        if (post < 0 || post % cfg.thin != 0) continue;
        out.gamma_sum += s.gamma;
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j)
                if (s.m[static_cast<size_t>(i)] == s.m[static_cast<size_t>(j)]) ++out.same_cluster_sum(i, j);
        out.traces.row(out.n_retained) = detail::trace_row(tl, s).transpose();
        ++out.n_retained;
    }
    return out;
}

}  // namespace ssmar
