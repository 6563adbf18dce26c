#pragma once

// Synthetic clustered third-order systems with correlated AR(1) state and observation noise,
// plus ROC scoring of edge-score matrices against the generating truth.

#include "ssmar/core.hpp"
#include "ssmar/random.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

namespace ssmar {

struct Example1Config {
    std::vector<int> cluster_sizes{15, 15, 20};
    Index T = 1000;
    double within_density = 0.9;
    double between_density = 0.09;
    double snr = 10.0;
    std::uint64_t seed = 1;
    // Realization seed for the noise processes; 0 means "derive from seed". Reusing `seed` with a
    // different series_seed gives an independent recording of the same system.
    std::uint64_t series_seed = 0;
    // How a present pair's coefficient is spread over the three lags: `subset` activates a random
    // nonempty subset of lags with independent signed magnitudes; `dirichlet` splits one signed
    // magnitude over all three lags with Dirichlet(1,1,1) weights.
    enum class LagSplit { subset, dirichlet } lag_split = LagSplit::dirichlet;
    double coef_min = 0.1;
    double coef_max = 0.5;
    double max_spectral_radius = 0.95;
    double noise_ar = 0.5;
    double noise_corr_max = 0.5;
    Index burnin = 200;
    double sample_rate_hz = 1000.0;
    bool shrink_if_not_pd = true;
};

struct GroundTruth {
    std::vector<int> cluster_sizes;
    std::vector<int> labels;          // 0-based cluster of each node
    IMatrix adjacency;                // adjacency(i,j) = 1 for a true edge j -> i (diagonal always 0)
    std::array<Matrix, 3> lag_coeffs; // A1, A2, A3
    Vector gains;                     // c
    Vector noise_scale;               // diagonal of D
    Matrix sigma_state;               // Sigma_1
    Matrix sigma_obs;                 // Sigma_2

    Index d() const { return adjacency.rows(); }
    bool within(Index i, Index j) const { return labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)]; }
};

struct Example1Data {
    TimeSeriesMatrix y;
    GroundTruth truth;
    Matrix signal;  // c_i x_i(t)
    Matrix noise;   // eps_i(t)
};

inline Vector cluster_labels_from_sizes(const std::vector<int>& sizes) {
    int d = 0;
    for (int s : sizes) {
        if (s < 1) throw Error("cluster sizes must be positive");
        d += s;
    }
    Vector out(d);
    int pos = 0;
    for (size_t k = 0; k < sizes.size(); ++k)
        for (int r = 0; r < sizes[k]; ++r) out(pos++) = static_cast<double>(k);
    return out;
}

// Spectral radius of the companion matrix of x(t) = sum_k A_k x(t-k).
inline double companion_spectral_radius(const std::array<Matrix, 3>& lags) {
    const Index d = lags[0].rows();
    Matrix C = Matrix::Zero(3 * d, 3 * d);
    for (int k = 0; k < 3; ++k) C.block(0, k * d, d, d) = lags[static_cast<size_t>(k)];
    C.block(d, 0, 2 * d, 2 * d).setIdentity();
    Eigen::EigenSolver<Matrix> es(C, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Block-diagonal correlation matrix: unit diagonal, within-block off-diagonals ~ Uniform(0, upper).
// Each block is redrawn until positive definite (up to 100 attempts). With shrink_if_not_pd the
// last draw's off-diagonal part is then scaled down until the smallest eigenvalue equals 0.1.
inline Matrix block_correlation(const std::vector<int>& sizes, double upper, Rng& rng, bool shrink_if_not_pd) {
    int d = 0;
    for (int s : sizes) d += s;
    Matrix S = Matrix::Identity(d, d);
    int pos = 0;
    for (int n : sizes) {
        Matrix blk;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            blk = Matrix::Identity(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) blk(i, j) = blk(j, i) = rng.uniform(0.0, upper);
            Eigen::SelfAdjointEigenSolver<Matrix> es(blk, Eigen::EigenvaluesOnly);
            ok = es.eigenvalues().minCoeff() > 0.0;
        }
        if (!ok) {
            if (!shrink_if_not_pd)
                throw Error("block_correlation: no positive definite draw in 100 attempts for block of size " +
                            std::to_string(n));
            Matrix off = blk - Matrix::Identity(n, n);
            Eigen::SelfAdjointEigenSolver<Matrix> es(off, Eigen::EigenvaluesOnly);
            const double lmin = es.eigenvalues().minCoeff();
            blk = Matrix::Identity(n, n) + (0.9 / -lmin) * off;
        }
        S.block(pos, pos, n, n) = blk;
        pos += n;
    }
    return S;
}

// e(t) = coef e(t-1) + delta(t), delta ~ MVN(0, cov); column 0 is drawn from the stationary law.
inline Matrix generate_ar1_noise(Index T, double coef, const Matrix& cov, Rng& rng) {
    if (!(std::abs(coef) < 1.0)) throw Error("generate_ar1_noise: |coef| must be below 1");
    if (T < 1) throw Error("generate_ar1_noise: T must be positive");
    if (cov.rows() != cov.cols() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw Error("generate_ar1_noise: covariance must be symmetric");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw Error("generate_ar1_noise: covariance is not positive definite");
    const Matrix L = llt.matrixL();
    const Index d = cov.rows();
    Matrix e(d, T);
    e.col(0) = L * rng.normal_vector(d) / std::sqrt(1.0 - coef * coef);
    for (Index t = 1; t < T; ++t) e.col(t) = coef * e.col(t - 1) + L * rng.normal_vector(d);
    return e;
}

inline Example1Data generate_example1(const Example1Config& cfg) {
    if (cfg.within_density < 0.0 || cfg.within_density > 1.0 || cfg.between_density < 0.0 || cfg.between_density > 1.0)
        throw Error("generate_example1: densities must lie in [0,1]");
    if (cfg.T < 10) throw Error("generate_example1: T must be at least 10");
    if (!(cfg.snr > 0.0)) throw Error("generate_example1: snr must be positive");
    const Vector lab = cluster_labels_from_sizes(cfg.cluster_sizes);
    const Index d = lab.size();

    Rng rs(derive_seed(cfg.seed, 0));
    GroundTruth g;
    g.cluster_sizes = cfg.cluster_sizes;
    g.labels.resize(static_cast<size_t>(d));
    for (Index i = 0; i < d; ++i) g.labels[static_cast<size_t>(i)] = static_cast<int>(lab(i));
    g.adjacency = IMatrix::Zero(d, d);
    for (auto& A : g.lag_coeffs) A = Matrix::Zero(d, d);

    // Self pairs are always present. See Example1Config::LagSplit for how a pair's coefficient is
    // spread over the three lags.
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            if (i != j) {
                if (!rs.bernoulli(g.within(i, j) ? cfg.within_density : cfg.between_density)) continue;
                g.adjacency(i, j) = 1;
            }
            if (cfg.lag_split == Example1Config::LagSplit::dirichlet) {
                const double sign = i == j ? 1.0 : (rs.bernoulli(0.5) ? 1.0 : -1.0);
                const double mag = rs.uniform(cfg.coef_min, cfg.coef_max);
                const Vector w = rs.dirichlet(Vector::Ones(3));
                for (int k = 0; k < 3; ++k) g.lag_coeffs[static_cast<size_t>(k)](i, j) = sign * mag * w(k);
                continue;
            }
            const int mask = 1 + static_cast<int>(std::floor(rs.uniform() * 7.0));
            for (int k = 0; k < 3; ++k) {
                if (!(mask & (1 << k))) continue;
                const double sign = rs.bernoulli(0.5) ? 1.0 : -1.0;
                g.lag_coeffs[static_cast<size_t>(k)](i, j) = sign * rs.uniform(cfg.coef_min, cfg.coef_max);
            }
        }
    }

    // Largest uniform scale s in [0,1] keeping the companion radius at or below the bound.
    if (companion_spectral_radius(g.lag_coeffs) > cfg.max_spectral_radius) {
        double lo = 0.0, hi = 1.0;
        const std::array<Matrix, 3> base = g.lag_coeffs;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            std::array<Matrix, 3> trial{base[0] * mid, base[1] * mid, base[2] * mid};
            if (companion_spectral_radius(trial) <= cfg.max_spectral_radius)
                lo = mid;
            else
                hi = mid;
        }
        for (int k = 0; k < 3; ++k) g.lag_coeffs[static_cast<size_t>(k)] = base[static_cast<size_t>(k)] * lo;
    }

    g.gains.resize(d);
    for (Index i = 0; i < d; ++i) g.gains(i) = rs.uniform(0.8, 1.2);
    g.sigma_state = block_correlation(cfg.cluster_sizes, cfg.noise_corr_max, rs, cfg.shrink_if_not_pd);
    g.sigma_obs = block_correlation(cfg.cluster_sizes, cfg.noise_corr_max, rs, cfg.shrink_if_not_pd);

    Rng rx(cfg.series_seed != 0 ? cfg.series_seed : derive_seed(cfg.seed, 1));
    const Index total = cfg.burnin + cfg.T;
    const Matrix eta = generate_ar1_noise(total, cfg.noise_ar, g.sigma_state, rx);
    Matrix x = Matrix::Zero(d, total);
    for (Index t = 0; t < total; ++t) {
        Vector v = eta.col(t);
        for (int k = 0; k < 3; ++k)
            if (t - k - 1 >= 0) v.noalias() += g.lag_coeffs[static_cast<size_t>(k)] * x.col(t - k - 1);
        x.col(t) = v;
    }
    Example1Data out;
    out.signal = g.gains.asDiagonal() * x.rightCols(cfg.T);

    const Matrix zeta = generate_ar1_noise(cfg.T, cfg.noise_ar, g.sigma_obs, rx);
    g.noise_scale.resize(d);
    const double stationary = 1.0 / (1.0 - cfg.noise_ar * cfg.noise_ar);
    for (Index i = 0; i < d; ++i) {
        const auto s = out.signal.row(i);
        const double mean = s.mean();
        const double var = (s.array() - mean).square().sum() / static_cast<double>(cfg.T - 1);
        g.noise_scale(i) = var / (cfg.snr * stationary);
    }
    out.noise = g.noise_scale.cwiseSqrt().asDiagonal() * zeta;
    out.y = make_series(out.signal + out.noise, cfg.sample_rate_hz);
    out.truth = std::move(g);
    return out;
}

// ---------------------------------------------------------------------------------------------

enum class PairSet { all, within, between };

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0) with threshold +inf, ends at (1,1)
    double auc = 0.0;
};

// Scores (i,j) rate the edge j -> i. The diagonal is never evaluated.
inline RocCurve roc_curve(const Matrix& scores, const GroundTruth& truth, PairSet restrict = PairSet::all) {
    const Index d = truth.d();
    if (scores.rows() != d || scores.cols() != d) throw Error("roc_curve: score matrix must be d x d");
    if (!scores.allFinite()) throw Error("roc_curve: scores must be finite");
    std::vector<std::pair<double, int>> items;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool w = truth.within(i, j);
            if (restrict == PairSet::within && !w) continue;
            if (restrict == PairSet::between && w) continue;
            items.emplace_back(scores(i, j), truth.adjacency(i, j));
        }
    double P = 0, N = 0;
    for (const auto& it : items) (it.second ? P : N) += 1.0;
    if (P == 0 || N == 0) throw Error("roc_curve: need both positive and negative pairs in the evaluated set");
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    RocCurve rc;
    rc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double tp = 0, fp = 0;
    for (size_t k = 0; k < items.size();) {
        const double thr = items[k].first;
        while (k < items.size() && items[k].first == thr) {
            (items[k].second ? tp : fp) += 1.0;
            ++k;
        }
        const RocPoint prev = rc.points.back();
        const RocPoint next{thr, fp / N, tp / P};
        rc.auc += 0.5 * (next.fpr - prev.fpr) * (next.tpr + prev.tpr);
        rc.points.push_back(next);
    }
    return rc;
}

// Selection rates at a fixed rule score > threshold.
struct SelectionRates {
    double tpr;
    double fpr;
};

inline SelectionRates selection_rates(const Matrix& scores, const GroundTruth& truth, double threshold,
                                      PairSet restrict = PairSet::all) {
    double tp = 0, fp = 0, P = 0, N = 0;
    for (Index i = 0; i < truth.d(); ++i)
        for (Index j = 0; j < truth.d(); ++j) {
            if (i == j) continue;
            const bool w = truth.within(i, j);
            if (restrict == PairSet::within && !w) continue;
            if (restrict == PairSet::between && w) continue;
            const bool sel = scores(i, j) > threshold;
            if (truth.adjacency(i, j)) {
                P += 1;
                tp += sel;
            } else {
                N += 1;
                fp += sel;
            }
        }
    return {P > 0 ? tp / P : 0.0, N > 0 ? fp / N : 0.0};
}

// Baseline edge scores: |coefficients| of a lag-1 least-squares VAR fit on standardized channels.
inline Matrix lag1_least_squares_scores(const Matrix& y) {
    const Index d = y.rows();
    const Index T = y.cols();
    Matrix z(d, T);
    for (Index i = 0; i < d; ++i) {
        const double mean = y.row(i).mean();
        const double sd = std::sqrt((y.row(i).array() - mean).square().sum() / static_cast<double>(T - 1));
        z.row(i) = (y.row(i).array() - mean) / (sd > 0.0 ? sd : 1.0);
    }
    const auto lag = z.leftCols(T - 1);
    const auto cur = z.rightCols(T - 1);
    Matrix G = lag * lag.transpose();
    G.diagonal().array() += 1e-8 * std::max(1.0, G.trace() / static_cast<double>(d));
    return G.ldlt().solve((cur * lag.transpose()).transpose()).transpose().cwiseAbs();
}

}  // namespace ssmar
