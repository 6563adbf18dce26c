#pragma once

// One-dataset fitting: EM start, optional change of K, parallel Gibbs chains, pooled summary.

#include "ssmar/core.hpp"
#include "ssmar/em.hpp"
#include "ssmar/inference.hpp"
#include "ssmar/random.hpp"
#include "ssmar/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ssmar {

inline int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// Runs fn(0..n-1) on up to `jobs` threads. The first exception thrown by any task is rethrown.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    jobs = std::clamp(jobs, 1, n);
    if (jobs == 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int k = next++; k < n; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// Centres each channel and scales it to unit sample variance.
inline Matrix standardize_rows(const Matrix& y) {
    Matrix z = y;
    const double n = static_cast<double>(std::max<Index>(1, y.cols() - 1));
    for (Index i = 0; i < y.rows(); ++i) {
        z.row(i).array() -= y.row(i).mean();
        const double sd = std::sqrt(z.row(i).squaredNorm() / n);
        if (!(sd > 0.0)) throw Error("channel " + std::to_string(i + 1) + " has zero variance");
        z.row(i) /= sd;
    }
    return z;
}

// Changes the number of clusters of an EM solution. Extra clusters start empty; surplus clusters
// are removed by folding the smallest one into the cluster it shares the most edges with.
inline ModelParams adapt_clusters(const ModelParams& theta, const Hyperparams& h, Index K, double margin = 1e-3) {
    if (K < 1) throw Error("number of clusters must be at least 1");
    if (K > theta.d()) throw Error("number of clusters cannot exceed the number of channels");
    ModelParams s = compact_labels(theta);
    while (s.K() > K) {
        const Vector n = label_counts(s);
        Index small = 0;
        for (Index k = 1; k < n.size(); ++k)
            if (n(k) < n(small)) small = k;
        Vector links = Vector::Zero(s.K());
        for (Index i = 0; i < s.d(); ++i)
            for (Index j = 0; j < s.d(); ++j) {
                if (!s.gamma(i, j)) continue;
                const int a = s.m[static_cast<size_t>(i)], b = s.m[static_cast<size_t>(j)];
                if (a == small && b != small) links(b) += 1.0;
                if (b == small && a != small) links(a) += 1.0;
            }
        links(small) = -1.0;
        Index target = 0;
        for (Index k = 0; k < links.size(); ++k)
            if (links(k) > links(target)) target = k;
        for (auto& m : s.m)
            if (m == small) m = static_cast<int>(target);
        s = compact_labels(s);
    }
    if (s.K() < K) {
        const Index old = s.K();
        Matrix B = Matrix::Constant(K, K, 0.5 * h.u0);
        B.diagonal().setConstant(0.5 * (h.l0 + 1.0));
        B.topLeftCorner(old, old) = s.B;
        s.B = B;
        s.p = Vector::Zero(K);
    }
    Hyperparams hk = h;
    hk.alpha = Vector::Constant(K, h.alpha.size() > 0 ? h.alpha.mean() : 1.0);
    detail::m_step_blocks(s, hk, margin);
    const Vector n = label_counts(s);
    s.p = (n.array() + hk.alpha.array()) / (n.sum() + hk.alpha.sum());
    return s;
}

struct FitConfig {
    ChainConfig chain;
    int n_chains = 1;
    EmConfig em;
    Hyperparams prior = default_hyperparams(1);  // alpha(0) is the per-cluster concentration
    Index k = 0;                                 // 0 keeps the EM selection
    bool standardize = true;
};

struct FitResult {
    EmResult em;
    ModelParams init;
    Hyperparams h;
    std::vector<ChainOutput> chains;
    ChainOutput merged;
    PosteriorSummary summary;
};

// Chain c uses seed derive_seed(cfg.chain.seed, c).
inline FitResult fit_dataset(const TimeSeriesMatrix& data, const FitConfig& cfg, int jobs = 1) {
    validate_series(data);
    validate_chain_config(cfg.chain);
    if (cfg.n_chains < 1) throw Error("n_chains must be at least 1");
    const Matrix y = cfg.standardize ? standardize_rows(data.values) : data.values;

    FitResult r;
    r.em = em_fit(y, cfg.prior, cfg.em);
    r.init = r.em.theta;
    r.h = r.em.h;
    if (cfg.k > 0 && cfg.k != r.em.K_selected) {
        r.init = adapt_clusters(r.em.theta, cfg.prior, cfg.k, cfg.em.b_margin);
        r.h.alpha = Vector::Constant(cfg.k, cfg.prior.alpha.mean());
    }
    r.chains.resize(static_cast<size_t>(cfg.n_chains));
    parallel_for(cfg.n_chains, jobs, [&](int c) {
        ChainConfig cc = cfg.chain;
        cc.seed = derive_seed(cfg.chain.seed, static_cast<std::uint64_t>(c));
        r.chains[static_cast<size_t>(c)] = run_chain(y, r.init, cc, r.h);
    });
    r.merged = merge_chains(r.chains);
    r.summary = posterior_summary(r.merged);
    return r;
}

}  // namespace ssmar
