#pragma once

// Posterior summaries, empirical-null threshold calibration, cluster/edge extraction and the
// Gelman-Rubin diagnostic.

#include "ssmar/core.hpp"
#include "ssmar/random.hpp"
#include "ssmar/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace ssmar {

struct PosteriorSummary {
    Matrix clust_prob;  // P(m_i = m_j | Y)
    Matrix edge_prob;   // P(gamma_ij = 1 | Y), edge j -> i
    int num_samples = 0;

    Index d() const { return edge_prob.rows(); }
};

struct Edge {
    Index from;
    Index to;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct NetworkEstimate {
    std::vector<std::vector<Index>> clusters;  // 0-based node ids, each sorted, ordered by smallest member
    std::vector<Edge> edges;                   // sorted
    double threshold_m = 0.0;
    double threshold_gamma = 0.0;
};

inline PosteriorSummary posterior_summary(const ChainOutput& out) {
    if (out.n_retained < 1) throw Error("posterior_summary: chain retained no draws");
    const double S = static_cast<double>(out.n_retained);
    PosteriorSummary s;
    s.clust_prob = out.same_cluster_sum.cast<double>() / S;
    s.edge_prob = out.gamma_sum.cast<double>() / S;
    s.num_samples = out.n_retained;
    return s;
}

// Pools chains by summing their integer accumulators.
inline ChainOutput merge_chains(const std::vector<ChainOutput>& chains) {
    if (chains.empty()) throw Error("merge_chains: no chains");
    ChainOutput out;
    out.gamma_sum = chains.front().gamma_sum;
    out.same_cluster_sum = chains.front().same_cluster_sum;
    out.n_retained = chains.front().n_retained;
    for (size_t k = 1; k < chains.size(); ++k) {
        out.gamma_sum += chains[k].gamma_sum;
        out.same_cluster_sum += chains[k].same_cluster_sum;
        out.n_retained += chains[k].n_retained;
    }
    return out;
}

// Offsets t_i (0-based start of the segment for channel i) with pairwise gaps of at least 2T.
// Channels are placed in a random order at sorted random positions; the slack beyond the minimum
// spacing is split uniformly among the gaps.
inline std::vector<Index> null_offsets(Index d, Index length, Index T, Rng& rng) {
    const Index min_len = 2 * T * d + T;
    if (length < min_len)
        throw Error("build_null_dataset: series length " + std::to_string(length) + " is too short; need at least " +
                    std::to_string(min_len) + " time points for " + std::to_string(d) + " channels and T=" +
                    std::to_string(T));
    // Sorted starts s_0 < ... < s_{d-1} with s_{k+1} - s_k >= 2T and s_{d-1} + T <= length.
    const Index slack = length - T - 2 * T * (d - 1);
    std::vector<Index> extra(static_cast<size_t>(d));
    for (auto& e : extra) e = static_cast<Index>(std::floor(rng.uniform() * static_cast<double>(slack + 1)));
    std::sort(extra.begin(), extra.end());
    std::vector<Index> starts(static_cast<size_t>(d));
    for (Index k = 0; k < d; ++k) starts[static_cast<size_t>(k)] = extra[static_cast<size_t>(k)] + 2 * T * k;
    std::vector<Index> perm(static_cast<size_t>(d));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<Index> offsets(static_cast<size_t>(d));
    for (Index k = 0; k < d; ++k) offsets[static_cast<size_t>(perm[static_cast<size_t>(k)])] = starts[static_cast<size_t>(k)];
    return offsets;
}

inline TimeSeriesMatrix build_null_dataset(const TimeSeriesMatrix& long_series, Index T, Rng& rng) {
    if (T < 1) throw Error("build_null_dataset: T must be positive");
    const Index d = long_series.channels();
    const std::vector<Index> off = null_offsets(d, long_series.length(), T, rng);
    TimeSeriesMatrix out;
    out.sample_rate_hz = long_series.sample_rate_hz;
    out.channel_labels = long_series.channel_labels;
    out.values.resize(d, T);
    for (Index i = 0; i < d; ++i) out.values.row(i) = long_series.values.row(i).segment(off[static_cast<size_t>(i)], T);
    return out;
}

// Type-7 empirical quantile (linear interpolation between order statistics).
inline double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw Error("empirical_quantile: no values");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<double> off_diagonal(const Matrix& m) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            if (i != j) out.push_back(m(i, j));
    return out;
}

struct Thresholds {
    double threshold_m = 0.0;
    double threshold_gamma = 0.0;
};

inline Thresholds calibrate_thresholds(const std::vector<PosteriorSummary>& nulls, double pvalue) {
    if (!(pvalue > 0.0 && pvalue < 1.0)) throw Error("calibrate_thresholds: pvalue must lie in (0,1)");
    std::vector<double> pm, pg;
    for (const auto& s : nulls) {
        const auto c = off_diagonal(s.clust_prob);
        pm.insert(pm.end(), c.begin(), c.end());
        const auto e = off_diagonal(s.edge_prob);
        pg.insert(pg.end(), e.begin(), e.end());
    }
    if (pm.empty() || pg.empty()) throw Error("calibrate_thresholds: null pool has no off-diagonal entries");
    return {empirical_quantile(std::move(pm), 1.0 - pvalue), empirical_quantile(std::move(pg), 1.0 - pvalue)};
}

class DisjointSets {
public:
    explicit DisjointSets(Index n) : parent_(static_cast<size_t>(n)), rank_(static_cast<size_t>(n), 0) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }

    Index find(Index x) {
        Index root = x;
        while (parent_[static_cast<size_t>(root)] != root) root = parent_[static_cast<size_t>(root)];
        while (parent_[static_cast<size_t>(x)] != root) {
            const Index next = parent_[static_cast<size_t>(x)];
            parent_[static_cast<size_t>(x)] = root;
            x = next;
        }
        return root;
    }

    void unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
        parent_[static_cast<size_t>(b)] = a;
        if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)]) ++rank_[static_cast<size_t>(a)];
    }

private:
    std::vector<Index> parent_;
    std::vector<int> rank_;
};

inline std::vector<std::vector<Index>> extract_clusters(const PosteriorSummary& s, double threshold_m) {
    const Index d = s.d();
    DisjointSets ds(d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (i != j && s.clust_prob(i, j) > threshold_m) ds.unite(i, j);
    std::vector<std::vector<Index>> groups;
    std::vector<Index> slot(static_cast<size_t>(d), -1);
    for (Index i = 0; i < d; ++i) {
        const Index r = ds.find(i);
        if (slot[static_cast<size_t>(r)] < 0) {
            slot[static_cast<size_t>(r)] = static_cast<Index>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<size_t>(slot[static_cast<size_t>(r)])].push_back(i);
    }
    return groups;
}

inline std::vector<Edge> select_edges(const PosteriorSummary& s, double threshold_gamma) {
    std::vector<Edge> edges;
    for (Index i = 0; i < s.d(); ++i)
        for (Index j = 0; j < s.d(); ++j)
            if (s.edge_prob(i, j) > threshold_gamma) edges.push_back({j, i});
    std::sort(edges.begin(), edges.end());
    return edges;
}

inline NetworkEstimate estimate_network(const PosteriorSummary& s, double threshold_m, double threshold_gamma) {
    return {extract_clusters(s, threshold_m), select_edges(s, threshold_gamma), threshold_m, threshold_gamma};
}

// Potential scale reduction factor sqrt((n-1)/n + B/(n W)).
inline double gelman_rubin(const std::vector<std::vector<double>>& traces) {
    const size_t m = traces.size();
    if (m < 2) throw Error("gelman_rubin: need at least 2 chains");
    const size_t n = traces.front().size();
    if (n < 10) throw Error("gelman_rubin: chains must have at least 10 draws");
    for (const auto& t : traces)
        if (t.size() != n) throw Error("gelman_rubin: chains must have equal lengths");
    std::vector<double> means(m);
    double W = 0.0;
    for (size_t k = 0; k < m; ++k) {
        const double mean = std::accumulate(traces[k].begin(), traces[k].end(), 0.0) / static_cast<double>(n);
        means[k] = mean;
        double ss = 0.0;
        for (double v : traces[k]) ss += (v - mean) * (v - mean);
        W += ss / static_cast<double>(n - 1);
    }
    W /= static_cast<double>(m);
    if (!(W > 0.0)) throw Error("gelman_rubin: zero within-chain variance (degenerate trace)");
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
    double Bv = 0.0;
    for (double mu : means) Bv += (mu - grand) * (mu - grand);
    Bv *= static_cast<double>(n) / static_cast<double>(m - 1);
    const double nn = static_cast<double>(n);
    return std::sqrt((nn - 1.0) / nn + Bv / (nn * W));
}

}  // namespace ssmar
