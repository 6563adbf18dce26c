#pragma once

// Seizure-recording analysis: preprocessing, fixed-length segmentation around onsets, per-period
// averaging of posterior probabilities, average directional connectivity (ADC) and onset-zone
// candidate selection.

#include "ssmar/core.hpp"
#include "ssmar/fit.hpp"
#include "ssmar/inference.hpp"
#include "ssmar/random.hpp"
#include "ssmar/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace ssmar {

struct Period {
    std::string label;
    double start_s;
    double end_s;
};

struct Segment {
    std::string label;
    TimeSeriesMatrix data;
};

// Non-overlapping windows aligned to each period start. Times are seconds from the first sample.
inline std::vector<Segment> segment_series(const TimeSeriesMatrix& y, double window_s, const std::vector<Period>& periods) {
    if (!(window_s > 0.0)) throw Error("segment_series: window length must be positive");
    const double fs = y.sample_rate_hz;
    const Index w = static_cast<Index>(std::llround(window_s * fs));
    if (w < 2) throw Error("segment_series: window holds fewer than 2 samples");
    std::vector<Segment> out;
    for (const auto& p : periods) {
        const Index a = static_cast<Index>(std::llround(p.start_s * fs));
        const Index b = static_cast<Index>(std::llround(p.end_s * fs));
        if (b - a < w)
            throw Error("segment_series: period '" + p.label + "' is shorter than one window");
        if (a < 0 || b > y.length())
            throw Error("segment_series: period '" + p.label + "' lies outside the recording");
        for (Index s = a; s + w <= b; s += w) {
            TimeSeriesMatrix seg;
            seg.sample_rate_hz = fs;
            seg.channel_labels = y.channel_labels;
            seg.values = y.values.middleCols(s, w);
            out.push_back({p.label, std::move(seg)});
        }
    }
    return out;
}

struct PeriodAverage {
    std::string label;
    Matrix clust_prob;
    Matrix edge_prob;
    int n_segments = 0;
};

inline PeriodAverage average_probabilities(const std::vector<PosteriorSummary>& summaries, const std::string& label = {}) {
    if (summaries.empty()) throw Error("average_probabilities: period '" + label + "' has no summaries");
    PeriodAverage avg;
    avg.label = label;
    const Index d = summaries.front().d();
    avg.clust_prob = Matrix::Zero(d, d);
    avg.edge_prob = Matrix::Zero(d, d);
    for (const auto& s : summaries) {
        if (s.d() != d || s.clust_prob.rows() != d)
            throw Error("average_probabilities: summaries in period '" + label + "' differ in dimension");
        avg.clust_prob += s.clust_prob;
        avg.edge_prob += s.edge_prob;
    }
    avg.n_segments = static_cast<int>(summaries.size());
    avg.clust_prob /= static_cast<double>(avg.n_segments);
    avg.edge_prob /= static_cast<double>(avg.n_segments);
    return avg;
}

// Groups labelled summaries by label (in order of first appearance) and averages each group.
inline std::vector<PeriodAverage> average_by_period(const std::vector<std::pair<std::string, PosteriorSummary>>& items) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<PosteriorSummary>> groups;
    for (const auto& [label, s] : items) {
        if (!groups.count(label)) order.push_back(label);
        groups[label].push_back(s);
    }
    std::vector<PeriodAverage> out;
    for (const auto& label : order) out.push_back(average_probabilities(groups[label], label));
    if (!out.empty())
        for (const auto& a : out)
            if (a.edge_prob.rows() != out.front().edge_prob.rows())
                throw Error("average_by_period: periods differ in dimension");
    return out;
}

// ADC_j = mean over i of edge_prob(i, j): the average outgoing influence of node j.
inline Vector adc_profile(const Matrix& edge_prob_avg) {
    if (edge_prob_avg.rows() < 1) throw Error("adc_profile: empty matrix");
    return edge_prob_avg.colwise().mean().transpose();
}

using PeriodAdc = std::map<std::string, Vector>;  // period label -> ADC vector, for one seizure

struct SozResult {
    std::vector<Index> candidates;  // 0-based node ids
    Vector onset_change;            // ADC(post1) - ADC(pre1), averaged over seizures
    double threshold = 0.0;         // largest |ADC(pre1) - ADC(pre2)| over nodes and seizures
};

inline SozResult soz_candidates(const std::vector<PeriodAdc>& seizures, const std::string& pre2 = "pre2",
                                const std::string& pre1 = "pre1", const std::string& post1 = "post1") {
    if (seizures.empty()) throw Error("soz_candidates: no seizures");
    SozResult r;
    Index d = -1;
    for (size_t s = 0; s < seizures.size(); ++s) {
        const auto& per = seizures[s];
        if (!per.count(pre1) || !per.count(pre2))
            throw Error("soz_candidates: seizure " + std::to_string(s + 1) + " needs two pre-seizure periods ('" + pre2 +
                        "', '" + pre1 + "')");
        if (!per.count(post1)) throw Error("soz_candidates: seizure " + std::to_string(s + 1) + " lacks '" + post1 + "'");
        for (const auto& [label, v] : per) {
            if (d < 0) d = v.size();
            if (v.size() != d) throw Error("soz_candidates: ADC vectors differ in length");
        }
        const Vector& a2 = per.at(pre2);
        const Vector& a1 = per.at(pre1);
        const Vector& b1 = per.at(post1);
        r.threshold = std::max(r.threshold, (a1 - a2).cwiseAbs().maxCoeff());
        if (r.onset_change.size() == 0) r.onset_change = Vector::Zero(d);
        r.onset_change += b1 - a1;
    }
    r.onset_change /= static_cast<double>(seizures.size());
    for (Index j = 0; j < d; ++j)
        if (r.onset_change(j) > r.threshold) r.candidates.push_back(j);
    return r;
}

// ---------------------------------------------------------------------------------------------

struct PreprocessConfig {
    double target_hz = 1000.0;  // <= 0 disables downsampling
    bool notch = true;
    double notch_hz = 60.0;
    double notch_q = 30.0;
    bool notch_before_downsample = false;
    bool remove_pc = true;
};

inline TimeSeriesMatrix preprocess(const TimeSeriesMatrix& y, const PreprocessConfig& cfg) {
    TimeSeriesMatrix out = y;
    const bool resample = cfg.target_hz > 0.0 && cfg.target_hz != y.sample_rate_hz;
    if (cfg.notch && cfg.notch_before_downsample) out = notch_filter(out, cfg.notch_hz, cfg.notch_q);
    if (resample) out = downsample(out, cfg.target_hz);
    if (cfg.notch && !cfg.notch_before_downsample) out = notch_filter(out, cfg.notch_hz, cfg.notch_q);
    if (cfg.remove_pc) out = remove_first_pc(out);
    return out;
}

struct SeizureRecording {
    TimeSeriesMatrix recording;
    double onset_s = 0.0;
    std::vector<Period> periods;  // times relative to onset
};

inline std::vector<Period> default_periods() {
    return {{"pre2", -50.0, -25.0}, {"pre1", -25.0, 0.0}, {"post1", 0.0, 25.0}, {"post2", 25.0, 50.0}};
}

struct PipelineConfig {
    PreprocessConfig preprocess;
    double window_s = 1.0;
    FitConfig fit;
    std::uint64_t seed = 1;
};

struct SeizureResult {
    std::vector<PeriodAverage> periods;
    PeriodAdc adc;
};

struct PipelineResult {
    std::vector<SeizureResult> seizures;
    SozResult soz;
    int n_segments = 0;
};

// Segment k (counting across seizures in order) runs its chains with seed derive_seed(cfg.seed, k).
inline PipelineResult run_pipeline(const std::vector<SeizureRecording>& seizures, const PipelineConfig& cfg, int jobs = 1) {
    if (seizures.empty()) throw Error("run_pipeline: no seizures");
    struct Job {
        size_t seizure;
        Segment segment;
    };
    std::vector<Job> work;
    for (size_t s = 0; s < seizures.size(); ++s) {
        const TimeSeriesMatrix y = preprocess(seizures[s].recording, cfg.preprocess);
        std::vector<Period> abs = seizures[s].periods;
        for (auto& p : abs) {
            p.start_s += seizures[s].onset_s;
            p.end_s += seizures[s].onset_s;
        }
        for (auto& seg : segment_series(y, cfg.window_s, abs)) work.push_back({s, std::move(seg)});
    }

    std::vector<PosteriorSummary> summaries(work.size());
    parallel_for(static_cast<int>(work.size()), jobs, [&](int k) {
        FitConfig fc = cfg.fit;
        fc.chain.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
        summaries[static_cast<size_t>(k)] = fit_dataset(work[static_cast<size_t>(k)].segment.data, fc, 1).summary;
    });

    PipelineResult r;
    r.n_segments = static_cast<int>(work.size());
    std::vector<PeriodAdc> adcs;
    for (size_t s = 0; s < seizures.size(); ++s) {
        std::vector<std::pair<std::string, PosteriorSummary>> items;
        for (size_t k = 0; k < work.size(); ++k)
            if (work[k].seizure == s) items.emplace_back(work[k].segment.label, summaries[k]);
        SeizureResult sr;
        sr.periods = average_by_period(items);
        for (const auto& p : sr.periods) sr.adc[p.label] = adc_profile(p.edge_prob);
        adcs.push_back(sr.adc);
        r.seizures.push_back(std::move(sr));
    }
    r.soz = soz_candidates(adcs);
    return r;
}

}  // namespace ssmar
