// ssmar command-line tool.

#include "ssmar/io.hpp"
#include "ssmar/ssmar.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>

namespace fs = std::filesystem;
using namespace ssmar;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string sha256_file(const std::string& path) {
    const std::string data = io::read_text(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("could not hash '" + path + "'");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 15];
    }
    return out;
}

// Collects what a run needs to be repeated: effective configuration, seed and input hashes.
struct Manifest {
    std::string command;
    Json config = Json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;

    void write(const std::string& dir) const {
        Json j;
        j["command"] = command;
        j["version"] = kVersion;
        if (seed) j["seed"] = *seed;
        j["config"] = config;
        Json in = Json::array();
        for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        j["inputs"] = in;
        io::write_json((fs::path(dir) / "manifest.json").string(), j);
    }
};

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

void require_file(const std::string& path, const std::string& flag) {
    if (!fs::is_regular_file(path)) throw Error(flag + ": file '" + path + "' not found");
}

// ----- shared configuration ----------------------------------------------------------------------

// Config file layout (every section and field optional):
// {"prior": {l0,u0,xi0,xi1,rho0,alpha}, "chain": {n_iter,n_burnin,thin,n_chains,max_traced_A},
//  "em": {max_iter,tol,b_margin}, "fit": {k,standardize},
//  "preprocess": {target_hz,notch,notch_hz,notch_q,notch_before_downsample,remove_pc}, "window_s": 1.0}
struct Settings {
    FitConfig fit;
    PreprocessConfig pre;
    double window_s = 1.0;
};

Settings load_settings(const std::string& path) {
    Settings s;
    s.fit.chain.n_iter = 10000;
    s.fit.chain.n_burnin = -1;  // resolved to n_iter / 2
    if (path.empty()) return s;
    require_file(path, "--config");
    const Json j = io::read_json(path);
    if (!j.is_object()) throw Error(path + ": expected a JSON object");
    const std::string w = path;
    if (j.contains("prior")) s.fit.prior = hyperparams_from_json(j["prior"], s.fit.prior, w + ": prior");
    if (j.contains("chain")) {
        const Json& c = j["chain"];
        const std::string cw = w + ": chain";
        s.fit.chain.n_iter = io::get_or(c, "n_iter", s.fit.chain.n_iter, cw);
        s.fit.chain.n_burnin = io::get_or(c, "n_burnin", s.fit.chain.n_burnin, cw);
        s.fit.chain.thin = io::get_or(c, "thin", s.fit.chain.thin, cw);
        s.fit.chain.max_traced_A = io::get_or(c, "max_traced_A", s.fit.chain.max_traced_A, cw);
        s.fit.n_chains = io::get_or(c, "n_chains", s.fit.n_chains, cw);
    }
    if (j.contains("em")) {
        const Json& e = j["em"];
        const std::string ew = w + ": em";
        s.fit.em.max_iter = io::get_or(e, "max_iter", s.fit.em.max_iter, ew);
        s.fit.em.tol = io::get_or(e, "tol", s.fit.em.tol, ew);
        s.fit.em.b_margin = io::get_or(e, "b_margin", s.fit.em.b_margin, ew);
    }
    if (j.contains("fit")) {
        s.fit.k = io::get_or(j["fit"], "k", s.fit.k, w + ": fit");
        s.fit.standardize = io::get_or(j["fit"], "standardize", s.fit.standardize, w + ": fit");
    }
    if (j.contains("preprocess")) {
        const Json& p = j["preprocess"];
        const std::string pw = w + ": preprocess";
        s.pre.target_hz = io::get_or(p, "target_hz", s.pre.target_hz, pw);
        s.pre.notch = io::get_or(p, "notch", s.pre.notch, pw);
        s.pre.notch_hz = io::get_or(p, "notch_hz", s.pre.notch_hz, pw);
        s.pre.notch_q = io::get_or(p, "notch_q", s.pre.notch_q, pw);
        s.pre.notch_before_downsample = io::get_or(p, "notch_before_downsample", s.pre.notch_before_downsample, pw);
        s.pre.remove_pc = io::get_or(p, "remove_pc", s.pre.remove_pc, pw);
    }
    s.window_s = io::get_or(j, "window_s", s.window_s, w);
    return s;
}

Json settings_json(const Settings& s) {
    Json j;
    j["prior"] = to_json(s.fit.prior);
    j["chain"] = {{"n_iter", s.fit.chain.n_iter},   {"n_burnin", s.fit.chain.n_burnin},
                  {"thin", s.fit.chain.thin},       {"n_chains", s.fit.n_chains},
                  {"max_traced_A", s.fit.chain.max_traced_A}};
    j["em"] = {{"max_iter", s.fit.em.max_iter}, {"tol", s.fit.em.tol}, {"b_margin", s.fit.em.b_margin}};
    j["fit"] = {{"k", s.fit.k}, {"standardize", s.fit.standardize}};
    j["preprocess"] = {{"target_hz", s.pre.target_hz},
                       {"notch", s.pre.notch},
                       {"notch_hz", s.pre.notch_hz},
                       {"notch_q", s.pre.notch_q},
                       {"notch_before_downsample", s.pre.notch_before_downsample},
                       {"remove_pc", s.pre.remove_pc}};
    j["window_s"] = s.window_s;
    return j;
}

// Flags for the fitting settings; values given on the command line override the config file.
struct FitFlags {
    std::string config;
    int iters = 0, burnin = -1, thin = 0, chains = 0, em_iters = 0;
    Index k = -1;
    bool no_standardize = false;
    CLI::Option *o_iters, *o_burnin, *o_thin, *o_chains, *o_k, *o_em;

    void add(CLI::App* app) {
        app->add_option("--config", config, "JSON settings file")->envname("SSMAR_CONFIG");
        o_iters = app->add_option("--iters", iters, "Gibbs iterations per chain (default 10000)");
        o_burnin = app->add_option("--burnin", burnin, "burn-in iterations (default iters/2)");
        o_thin = app->add_option("--thin", thin, "keep every n-th post burn-in draw");
        o_chains = app->add_option("--chains", chains, "number of chains (default 1)");
        o_k = app->add_option("--k", k, "number of clusters (default: EM selection)");
        o_em = app->add_option("--em-iters", em_iters, "maximum EM iterations (default 200)");
        app->add_flag("--no-standardize", no_standardize, "fit the raw channels instead of z-scores");
    }

    Settings resolve() const {
        Settings s = load_settings(config);
        if (o_iters->count()) s.fit.chain.n_iter = iters;
        if (o_burnin->count()) s.fit.chain.n_burnin = burnin;
        if (o_thin->count()) s.fit.chain.thin = thin;
        if (o_chains->count()) s.fit.n_chains = chains;
        if (o_k->count()) s.fit.k = k;
        if (o_em->count()) s.fit.em.max_iter = em_iters;
        if (no_standardize) s.fit.standardize = false;
        if (s.fit.chain.n_burnin < 0) s.fit.chain.n_burnin = s.fit.chain.n_iter / 2;
        if (s.fit.k < 0) throw Error("--k must be nonnegative");
        validate_chain_config(s.fit.chain);
        if (s.fit.n_chains < 1) throw Error("--chains must be at least 1");
        return s;
    }
};

Json chain_file_json(const FitResult& r) {
    Json j = to_json(r.merged, false);
    j["n_chains"] = r.chains.size();
    Json chains = Json::array();
    for (const auto& c : r.chains) chains.push_back(to_json(c));
    j["chains"] = chains;
    return j;
}

// ----- subcommands -------------------------------------------------------------------------------

struct SimulateArgs {
    std::string out = ".";
    std::uint64_t seed = 0;
    std::uint64_t series_seed = 0;
    std::vector<int> sizes{15, 15, 20};
    Index T = 1000;
    double within = 0.9, between = 0.09, snr = 10.0;
    std::string lag_split = "dirichlet";
};

int run_simulate(const SimulateArgs& a) {
    Example1Config cfg;
    cfg.cluster_sizes = a.sizes;
    cfg.T = a.T;
    cfg.within_density = a.within;
    cfg.between_density = a.between;
    cfg.snr = a.snr;
    cfg.seed = a.seed;
    cfg.series_seed = a.series_seed;
    if (a.lag_split == "dirichlet")
        cfg.lag_split = Example1Config::LagSplit::dirichlet;
    else if (a.lag_split == "subset")
        cfg.lag_split = Example1Config::LagSplit::subset;
    else
        throw Error("--lag-split must be 'dirichlet' or 'subset'");
    const Example1Data data = generate_example1(cfg);
    ensure_dir(a.out);
    write_series(in_dir(a.out, "y.csv"), data.y);
    io::write_json(in_dir(a.out, "truth.json"), to_json(data.truth));
    Manifest m{"simulate"};
    m.seed = a.seed;
    m.config = {{"cluster_sizes", a.sizes}, {"T", a.T},        {"within_density", a.within},
                {"between_density", a.between}, {"snr", a.snr}, {"lag_split", a.lag_split},
                {"series_seed", a.series_seed}};
    m.write(a.out);
    return 0;
}

struct DataArgs {
    std::string data;
    double rate = 0.0;
    std::string out = ".";
    std::uint64_t seed = 0;
};

int run_fit(const DataArgs& a, const FitFlags& f, int jobs) {
    require_file(a.data, "--data");
    const Settings s = f.resolve();
    const TimeSeriesMatrix y = read_series(a.data, a.rate);
    FitConfig cfg = s.fit;
    cfg.chain.seed = a.seed;
    const FitResult r = fit_dataset(y, cfg, jobs);
    ensure_dir(a.out);
    io::write_json(in_dir(a.out, "chain_output.json"), chain_file_json(r));
    io::write_json(in_dir(a.out, "summary.json"), to_json(r.summary));
    Json em = to_json(r.em);
    em["initial_state"] = to_json(r.init);
    em["hyperparams"] = to_json(r.h);
    io::write_json(in_dir(a.out, "em.json"), em);
    io::write_text(in_dir(a.out, "em_trace.csv"), trace_csv(r.em.trace));
    Manifest m{"fit"};
    m.seed = a.seed;
    m.config = settings_json(s);
    m.config["sample_rate_hz"] = y.sample_rate_hz;
    m.inputs = {a.data};
    if (!f.config.empty()) m.inputs.push_back(f.config);
    m.write(a.out);
    std::cout << "K_selected=" << r.em.K_selected << " retained=" << r.merged.n_retained << "\n";
    return 0;
}

int run_null(const DataArgs& a, const FitFlags& f, Index length, double length_s, int replicates, int jobs) {
    require_file(a.data, "--data");
    if (replicates < 1) throw Error("--replicates must be at least 1");
    const Settings s = f.resolve();
    const TimeSeriesMatrix y = read_series(a.data, a.rate);
    Index T = length;
    if (T <= 0) {
        if (!(length_s > 0.0)) throw Error("give --length (samples) or --length-s (seconds)");
        T = static_cast<Index>(std::llround(length_s * y.sample_rate_hz));
    }
    std::vector<PosteriorSummary> out(static_cast<size_t>(replicates));
    std::vector<TimeSeriesMatrix> nulls;
    for (int r = 0; r < replicates; ++r) {
        Rng rng(derive_seed(a.seed, static_cast<std::uint64_t>(2 * r)));
        nulls.push_back(build_null_dataset(y, T, rng));
    }
    parallel_for(replicates, jobs, [&](int r) {
        FitConfig cfg = s.fit;
        cfg.chain.seed = derive_seed(a.seed, static_cast<std::uint64_t>(2 * r + 1));
        out[static_cast<size_t>(r)] = fit_dataset(nulls[static_cast<size_t>(r)], cfg, 1).summary;
    });
    ensure_dir(a.out);
    Json j;
    Json arr = Json::array();
    for (const auto& p : out) arr.push_back(to_json(p));
    j["summaries"] = arr;
    io::write_json(in_dir(a.out, "null_summaries.json"), j);
    Manifest m{"null"};
    m.seed = a.seed;
    m.config = settings_json(s);
    m.config["segment_length"] = T;
    m.config["replicates"] = replicates;
    m.inputs = {a.data};
    if (!f.config.empty()) m.inputs.push_back(f.config);
    m.write(a.out);
    return 0;
}

std::vector<PosteriorSummary> read_null_file(const std::string& path) {
    require_file(path, "--null");
    const Json j = io::read_json(path);
    std::vector<PosteriorSummary> out;
    if (j.is_object() && j.contains("summaries")) {
        const Json& arr = j["summaries"];
        if (!arr.is_array()) throw Error(path + ": field 'summaries' must be an array");
        for (size_t k = 0; k < arr.size(); ++k)
            out.push_back(summary_from_json(arr[k], path + ": summaries[" + std::to_string(k) + "]"));
    } else {
        out.push_back(summary_from_json(j, path));
    }
    return out;
}

int run_calibrate(const std::vector<std::string>& nulls, double pvalue, const std::string& outdir) {
    std::vector<PosteriorSummary> pool;
    for (const auto& p : nulls) {
        const auto s = read_null_file(p);
        pool.insert(pool.end(), s.begin(), s.end());
    }
    const Thresholds t = calibrate_thresholds(pool, pvalue);
    ensure_dir(outdir);
    io::write_json(in_dir(outdir, "thresholds.json"),
                   Json{{"pvalue", pvalue}, {"threshold_m", t.threshold_m}, {"threshold_gamma", t.threshold_gamma},
                        {"n_null_datasets", pool.size()}});
    Manifest m{"calibrate"};
    m.config = {{"pvalue", pvalue}};
    m.inputs = nulls;
    m.write(outdir);
    std::cout << "threshold_m=" << io::format_double(t.threshold_m)
              << " threshold_gamma=" << io::format_double(t.threshold_gamma) << "\n";
    return 0;
}

PosteriorSummary read_summary_file(const std::string& path) {
    require_file(path, "--summary");
    const Json j = io::read_json(path);
    return summary_from_json(j, path);
}

int run_network(const std::string& summary, std::optional<double> pm, std::optional<double> pg,
                const std::string& thresholds, const std::string& outdir) {
    const PosteriorSummary s = read_summary_file(summary);
    std::vector<std::string> inputs{summary};
    if (!thresholds.empty()) {
        require_file(thresholds, "--thresholds");
        const Json t = io::read_json(thresholds);
        if (!pm) pm = io::get_as<double>(t, "threshold_m", thresholds);
        if (!pg) pg = io::get_as<double>(t, "threshold_gamma", thresholds);
        inputs.push_back(thresholds);
    }
    if (!pm || !pg) throw Error("give --pm and --pg or a --thresholds file");
    const NetworkEstimate n = estimate_network(s, *pm, *pg);
    ensure_dir(outdir);
    io::write_json(in_dir(outdir, "network.json"), to_json(n));
    io::write_text(in_dir(outdir, "edges.csv"), edges_csv(n, s));
    io::write_text(in_dir(outdir, "membership.csv"), membership_csv(n));
    Manifest m{"network"};
    m.config = {{"threshold_m", *pm}, {"threshold_gamma", *pg}};
    m.inputs = inputs;
    m.write(outdir);
    return 0;
}

int run_roc(const std::string& summary, const std::string& truth_path, const std::string& baseline,
            const std::string& outdir) {
    const PosteriorSummary s = read_summary_file(summary);
    require_file(truth_path, "--truth");
    const GroundTruth g = truth_from_json(io::read_json(truth_path), truth_path);
    if (g.d() != s.d()) throw Error("--truth has " + std::to_string(g.d()) + " nodes but the summary has " + std::to_string(s.d()));
    ensure_dir(outdir);
    const RocCurve all = roc_curve(s.edge_prob, g);
    io::write_text(in_dir(outdir, "roc.csv"), roc_csv(all));
    Json res{{"auc", all.auc}};
    auto maybe = [&](PairSet p, const char* name) {
        try {
            res[name] = roc_curve(s.edge_prob, g, p).auc;
        } catch (const Error&) {
            res[name] = nullptr;  // one class absent in this subset
        }
    };
    maybe(PairSet::within, "auc_within");
    maybe(PairSet::between, "auc_between");
    std::vector<std::string> inputs{summary, truth_path};
    if (!baseline.empty()) {
        require_file(baseline, "--baseline");
        const TimeSeriesMatrix y = read_series(baseline, 1.0);
        const RocCurve b = roc_curve(lag1_least_squares_scores(y.values), g);
        res["baseline_auc"] = b.auc;
        io::write_text(in_dir(outdir, "roc_baseline.csv"), roc_csv(b));
        inputs.push_back(baseline);
    }
    io::write_json(in_dir(outdir, "roc.json"), res);
    Manifest m{"roc"};
    m.inputs = inputs;
    m.write(outdir);
    std::cout << "auc=" << io::format_double(all.auc) << "\n";
    return 0;
}

// Manifest layout: {"seizures": [{"recording": "a.csv", "onset_s": 120.0,
//                   "periods": [{"label": "pre2", "start_s": -50, "end_s": -25}, ...]}]}
// Recording paths are relative to the manifest; periods default to pre2/pre1/post1/post2.
std::vector<SeizureRecording> read_pipeline_manifest(const std::string& path, double rate, std::vector<std::string>& inputs) {
    require_file(path, "--manifest");
    const Json j = io::read_json(path);
    const Json& arr = io::field(j, "seizures", path);
    if (!arr.is_array() || arr.empty()) throw Error(path + ": field 'seizures' must be a nonempty array");
    std::vector<SeizureRecording> out;
    for (size_t k = 0; k < arr.size(); ++k) {
        const std::string w = path + ": seizures[" + std::to_string(k) + "]";
        SeizureRecording rec;
        fs::path rp = io::get_as<std::string>(arr[k], "recording", w);
        if (rp.is_relative()) rp = fs::path(path).parent_path() / rp;
        require_file(rp.string(), w + ".recording");
        rec.recording = read_series(rp.string(), rate);
        inputs.push_back(rp.string());
        rec.onset_s = io::get_as<double>(arr[k], "onset_s", w);
        if (arr[k].contains("periods")) {
            const Json& ps = arr[k]["periods"];
            if (!ps.is_array()) throw Error(w + ": field 'periods' must be an array");
            for (size_t p = 0; p < ps.size(); ++p) {
                const std::string pw = w + ".periods[" + std::to_string(p) + "]";
                rec.periods.push_back({io::get_as<std::string>(ps[p], "label", pw), io::get_as<double>(ps[p], "start_s", pw),
                                       io::get_as<double>(ps[p], "end_s", pw)});
            }
        } else {
            rec.periods = default_periods();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

int run_pipeline_cmd(const std::string& manifest, double rate, std::uint64_t seed, const FitFlags& f,
                     const std::string& outdir, int jobs) {
    Settings s = f.resolve();
    std::vector<std::string> inputs{manifest};
    const auto seizures = read_pipeline_manifest(manifest, rate, inputs);
    PipelineConfig cfg;
    cfg.preprocess = s.pre;
    cfg.window_s = s.window_s;
    cfg.fit = s.fit;
    cfg.seed = seed;
    const PipelineResult r = run_pipeline(seizures, cfg, jobs);
    ensure_dir(outdir);
    const auto& labels = seizures.front().recording.channel_labels;
    // ADC table: one row per (seizure, node), one column per period.
    std::vector<std::string> period_order;
    for (const auto& p : r.seizures.front().periods) period_order.push_back(p.label);
    std::string adc = "seizure,node,label";
    for (const auto& p : period_order) adc += "," + io::csv_escape(p);
    adc += "\n";
    Json periods = Json::array();
    for (size_t k = 0; k < r.seizures.size(); ++k) {
        const auto& sr = r.seizures[k];
        const Index d = sr.adc.begin()->second.size();
        for (Index i = 0; i < d; ++i) {
            adc += std::to_string(k + 1) + "," + std::to_string(i + 1) + "," +
                   io::csv_escape(i < static_cast<Index>(labels.size()) ? labels[static_cast<size_t>(i)] : "");
            for (const auto& p : period_order)
                adc += "," + (sr.adc.count(p) ? io::format_double(sr.adc.at(p)(i)) : std::string());
            adc += "\n";
        }
        Json per = Json::array();
        for (const auto& p : sr.periods)
            per.push_back({{"label", p.label},
                           {"n_segments", p.n_segments},
                           {"edge_prob", io::to_json(p.edge_prob)},
                           {"clust_prob", io::to_json(p.clust_prob)}});
        periods.push_back(per);
    }
    io::write_text(in_dir(outdir, "adc.csv"), adc);
    io::write_json(in_dir(outdir, "period_averages.json"), Json{{"seizures", periods}});
    std::string cand = "node,label,onset_change\n";
    for (Index i : r.soz.candidates)
        cand += std::to_string(i + 1) + "," +
                io::csv_escape(i < static_cast<Index>(labels.size()) ? labels[static_cast<size_t>(i)] : "") + "," +
                io::format_double(r.soz.onset_change(i)) + "\n";
    io::write_text(in_dir(outdir, "soz_candidates.csv"), cand);
    std::string change = "node,onset_change\n";
    for (Index i = 0; i < r.soz.onset_change.size(); ++i)
        change += std::to_string(i + 1) + "," + io::format_double(r.soz.onset_change(i)) + "\n";
    io::write_text(in_dir(outdir, "onset_change.csv"), change);
    Manifest m{"pipeline"};
    m.seed = seed;
    m.config = settings_json(s);
    m.config["soz_threshold"] = r.soz.threshold;
    m.config["n_segments"] = r.n_segments;
    m.inputs = inputs;
    if (!f.config.empty()) m.inputs.push_back(f.config);
    m.write(outdir);
    std::cout << "segments=" << r.n_segments << " candidates=" << r.soz.candidates.size() << "\n";
    return 0;
}

int run_diag(const std::vector<std::string>& files, int n_params, std::uint64_t seed, const std::string& outdir) {
    std::vector<ChainOutput> chains;
    for (const auto& p : files) {
        require_file(p, "--chains");
        const Json j = io::read_json(p);
        if (j.contains("chains")) {
            for (size_t k = 0; k < j["chains"].size(); ++k)
                chains.push_back(chain_output_from_json(j["chains"][k], p + ": chains[" + std::to_string(k) + "]"));
        } else {
            chains.push_back(chain_output_from_json(j, p));
        }
    }
    if (chains.size() < 2) throw Error("diag needs at least 2 chains across the given files");
    const auto& names = chains.front().trace_names;
    for (const auto& c : chains)
        if (c.trace_names != names || c.traces.rows() != chains.front().traces.rows())
            throw Error("diag: chains have different traced parameters or lengths");
    if (names.empty()) throw Error("diag: chain files contain no traces");
    std::vector<size_t> pick(names.size());
    std::iota(pick.begin(), pick.end(), size_t{0});
    if (n_params > 0 && static_cast<size_t>(n_params) < pick.size()) {
        Rng rng(seed);
        std::shuffle(pick.begin(), pick.end(), rng.engine());
        pick.resize(static_cast<size_t>(n_params));
        std::sort(pick.begin(), pick.end());
    }
    std::string csv = "parameter,rhat\n";
    double worst = 0.0;
    for (size_t k : pick) {
        std::vector<std::vector<double>> tr;
        for (const auto& c : chains) {
            const auto col = c.traces.col(static_cast<Index>(k));
            tr.emplace_back(col.data(), col.data() + col.size());
        }
        double r;
        try {
            r = gelman_rubin(tr);
        } catch (const Error&) {
            r = std::numeric_limits<double>::quiet_NaN();  // constant trace
        }
        if (std::isfinite(r)) worst = std::max(worst, r);
        csv += io::csv_escape(names[k]) + "," + (std::isfinite(r) ? io::format_double(r) : std::string("nan")) + "\n";
    }
    ensure_dir(outdir);
    io::write_text(in_dir(outdir, "rhat.csv"), csv);
    Manifest m{"diag"};
    m.seed = seed;
    m.config = {{"params", n_params}, {"n_chains", chains.size()}};
    m.inputs = files;
    m.write(outdir);
    std::cout << "max_rhat=" << io::format_double(worst) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Directional networks with cluster structure from multivariate time series"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    int jobs = default_jobs();
    app.add_option("--jobs", jobs, "worker threads (default: available cores)")->check(CLI::PositiveNumber);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "generate the three-cluster synthetic example");
    c_sim->add_option("--out", sim.out, "output directory");
    c_sim->add_option("--seed", sim.seed, "structure seed")->required();
    c_sim->add_option("--series-seed", sim.series_seed, "noise realization seed (default: derived)");
    c_sim->add_option("--sizes", sim.sizes, "cluster sizes")->delimiter(',');
    c_sim->add_option("--T", sim.T, "time points");
    c_sim->add_option("--within", sim.within, "within-cluster edge density");
    c_sim->add_option("--between", sim.between, "between-cluster edge density");
    c_sim->add_option("--snr", sim.snr, "signal-to-noise ratio");
    c_sim->add_option("--lag-split", sim.lag_split, "dirichlet or subset");

    DataArgs fit_args;
    FitFlags fit_flags;
    auto* c_fit = app.add_subcommand("fit", "EM initialization and Gibbs sampling on one dataset");
    c_fit->add_option("--data", fit_args.data, "series CSV")->required();
    c_fit->add_option("--rate", fit_args.rate, "sample rate when there is no sidecar");
    c_fit->add_option("--out", fit_args.out, "output directory");
    c_fit->add_option("--seed", fit_args.seed, "chain seed")->required();
    fit_flags.add(c_fit);

    DataArgs null_args;
    FitFlags null_flags;
    Index null_len = 0;
    double null_len_s = 0.0;
    int replicates = 1;
    auto* c_null = app.add_subcommand("null", "fit time-shifted null datasets for threshold calibration");
    c_null->add_option("--data", null_args.data, "long series CSV")->required();
    c_null->add_option("--rate", null_args.rate, "sample rate when there is no sidecar");
    c_null->add_option("--out", null_args.out, "output directory");
    c_null->add_option("--seed", null_args.seed, "seed")->required();
    c_null->add_option("--length", null_len, "null segment length in samples");
    c_null->add_option("--length-s", null_len_s, "null segment length in seconds");
    c_null->add_option("--replicates", replicates, "number of null datasets");
    null_flags.add(c_null);

    std::vector<std::string> cal_nulls;
    double pvalue = 0.01;
    std::string cal_out = ".";
    auto* c_cal = app.add_subcommand("calibrate", "selection thresholds from null posterior probabilities");
    c_cal->add_option("--null", cal_nulls, "null_summaries.json or summary files")->required();
    c_cal->add_option("--pvalue", pvalue, "tail probability");
    c_cal->add_option("--out", cal_out, "output directory");

    std::string net_summary, net_thr, net_out = ".";
    double pm = 0.0, pg = 0.0;
    auto* c_net = app.add_subcommand("network", "clusters and edges at given thresholds");
    c_net->add_option("--summary", net_summary, "summary.json")->required();
    auto* o_pm = c_net->add_option("--pm", pm, "clustering threshold");
    auto* o_pg = c_net->add_option("--pg", pg, "edge threshold");
    c_net->add_option("--thresholds", net_thr, "thresholds.json from calibrate");
    c_net->add_option("--out", net_out, "output directory");

    std::string roc_summary, roc_truth, roc_base, roc_out = ".";
    auto* c_roc = app.add_subcommand("roc", "ROC of edge probabilities against simulation truth");
    c_roc->add_option("--summary", roc_summary, "summary.json")->required();
    c_roc->add_option("--truth", roc_truth, "truth.json")->required();
    c_roc->add_option("--baseline", roc_base, "series CSV for the lag-1 least-squares baseline");
    c_roc->add_option("--out", roc_out, "output directory");

    std::string pipe_manifest, pipe_out = ".";
    double pipe_rate = 0.0;
    std::uint64_t pipe_seed = 0;
    FitFlags pipe_flags;
    auto* c_pipe = app.add_subcommand("pipeline", "seizure onset-zone analysis over a manifest of recordings");
    c_pipe->add_option("--manifest", pipe_manifest, "seizure manifest JSON")->required();
    c_pipe->add_option("--rate", pipe_rate, "sample rate when recordings have no sidecar");
    c_pipe->add_option("--seed", pipe_seed, "seed")->required();
    c_pipe->add_option("--out", pipe_out, "output directory");
    pipe_flags.add(c_pipe);

    std::vector<std::string> diag_files;
    int diag_params = 20;
    std::uint64_t diag_seed = 0;
    std::string diag_out = ".";
    auto* c_diag = app.add_subcommand("diag", "Gelman-Rubin statistics over chain traces");
    c_diag->add_option("--chains", diag_files, "chain_output.json files")->required();
    c_diag->add_option("--params", diag_params, "number of randomly chosen traced parameters (0 = all)");
    c_diag->add_option("--seed", diag_seed, "seed for choosing parameters")->required();
    c_diag->add_option("--out", diag_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*c_sim) return run_simulate(sim);
        if (*c_fit) return run_fit(fit_args, fit_flags, jobs);
        if (*c_null) return run_null(null_args, null_flags, null_len, null_len_s, replicates, jobs);
        if (*c_cal) return run_calibrate(cal_nulls, pvalue, cal_out);
        if (*c_net)
            return run_network(net_summary, o_pm->count() ? std::optional<double>(pm) : std::nullopt,
                               o_pg->count() ? std::optional<double>(pg) : std::nullopt, net_thr, net_out);
        if (*c_roc) return run_roc(roc_summary, roc_truth, roc_base, roc_out);
        if (*c_pipe) return run_pipeline_cmd(pipe_manifest, pipe_rate, pipe_seed, pipe_flags, pipe_out, jobs);
        if (*c_diag) return run_diag(diag_files, diag_params, diag_seed, diag_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
