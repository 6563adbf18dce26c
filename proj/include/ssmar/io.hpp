#pragma once

// File formats. Node ids and cluster labels are 1-based on disk and 0-based in memory.
//
// TimeSeriesMatrix: CSV with one row per channel, optional first row of channel labels, plus a
// JSON sidecar {sample_rate_hz, channel_labels}.

#include "ssmar/core.hpp"
#include "ssmar/em.hpp"
#include "ssmar/inference.hpp"
#include "ssmar/pipeline.hpp"
#include "ssmar/sampler.hpp"
#include "ssmar/simgen.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ssmar {

using Json = nlohmann::ordered_json;

namespace io {

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path + "'");
}

inline Json read_json(const std::string& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_double(const std::string& s, double& v) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    if (a == b) return false;
    const char* first = s.data() + a;
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + b, v);
    return res.ec == std::errc() && res.ptr == s.data() + b;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

// Numeric CSV; a first row that does not parse as numbers is returned in `header`.
inline Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* header = nullptr) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        std::vector<double> vals(fields.size());
        bool numeric = true;
        for (size_t k = 0; k < fields.size() && numeric; ++k) numeric = parse_double(fields[k], vals[k]);
        if (!numeric) {
            if (rows.empty() && header && header->empty()) {
                *header = fields;
                continue;
            }
            throw Error("'" + path + "' line " + std::to_string(lineno) + ": non-numeric field");
        }
        if (!rows.empty() && vals.size() != rows.front().size())
            throw Error("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                        std::to_string(rows.front().size()) + " fields, found " + std::to_string(vals.size()));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw Error("'" + path + "' contains no numeric rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return m;
}

inline std::string matrix_csv(const Matrix& m, const std::vector<std::string>& header = {}) {
    std::string s;
    if (!header.empty()) {
        for (size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + csv_escape(header[k]);
        s += "\n";
    }
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) s += ',';
            s += format_double(m(i, j));
        }
        s += '\n';
    }
    return s;
}

inline std::string sidecar_path(const std::string& csv_path) {
    const auto dot = csv_path.rfind('.');
    const auto slash = csv_path.find_last_of('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? csv_path.substr(0, dot) : csv_path) + ".json";
}

// ----- JSON field helpers (errors name the offending field) --------------------------------------

inline const Json& field(const Json& j, const std::string& name, const std::string& where) {
    if (!j.is_object()) throw Error(where + ": expected a JSON object");
    const auto it = j.find(name);
    if (it == j.end()) throw Error(where + ": missing field '" + name + "'");
    return *it;
}

template <class T>
T get_as(const Json& j, const std::string& name, const std::string& where) {
    const Json& v = field(j, name, where);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(where + ": field '" + name + "' has the wrong type");
    }
}

template <class T>
T get_or(const Json& j, const std::string& name, T fallback, const std::string& where) {
    if (!j.is_object() || !j.contains(name)) return fallback;
    return get_as<T>(j, name, where);
}

inline Json to_json(const Matrix& m) {
    Json a = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

inline Json to_json(const IMatrix& m) {
    Json a = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

inline Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Matrix matrix_from(const Json& j, const std::string& name, const std::string& where) {
    const Json& v = field(j, name, where);
    if (!v.is_array() || v.empty()) throw Error(where + ": field '" + name + "' must be a nonempty array of rows");
    const size_t cols = v.front().is_array() ? v.front().size() : 0;
    Matrix m(static_cast<Index>(v.size()), static_cast<Index>(cols));
    for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_array() || v[i].size() != cols) throw Error(where + ": field '" + name + "' has ragged rows");
        for (size_t k = 0; k < cols; ++k) {
            if (!v[i][k].is_number()) throw Error(where + ": field '" + name + "' has a non-numeric entry");
            m(static_cast<Index>(i), static_cast<Index>(k)) = v[i][k].get<double>();
        }
    }
    return m;
}

inline Vector vector_from(const Json& j, const std::string& name, const std::string& where) {
    const Json& v = field(j, name, where);
    if (!v.is_array()) throw Error(where + ": field '" + name + "' must be an array");
    Vector out(static_cast<Index>(v.size()));
    for (size_t k = 0; k < v.size(); ++k) {
        if (!v[k].is_number()) throw Error(where + ": field '" + name + "' has a non-numeric entry");
        out(static_cast<Index>(k)) = v[k].get<double>();
    }
    return out;
}

}  // namespace io

// ----- TimeSeriesMatrix --------------------------------------------------------------------------

inline TimeSeriesMatrix read_series(const std::string& csv_path, double default_rate_hz = 0.0) {
    std::vector<std::string> header;
    TimeSeriesMatrix y;
    y.values = io::read_matrix_csv(csv_path, &header);
    y.sample_rate_hz = default_rate_hz;
    const std::string side = io::sidecar_path(csv_path);
    if (std::ifstream(side).good()) {
        const Json j = io::read_json(side);
        y.sample_rate_hz = io::get_as<double>(j, "sample_rate_hz", side);
        if (j.contains("channel_labels")) y.channel_labels = io::get_as<std::vector<std::string>>(j, "channel_labels", side);
    }
    if (y.channel_labels.empty()) y.channel_labels = header;
    if (y.channel_labels.empty()) y.channel_labels = default_labels(y.channels());
    if (!(y.sample_rate_hz > 0.0))
        throw Error("'" + csv_path + "': sample_rate_hz unknown; provide a sidecar " + side + " or a rate option");
    validate_series(y);
    return y;
}

inline void write_series(const std::string& csv_path, const TimeSeriesMatrix& y) {
    io::write_text(csv_path, io::matrix_csv(y.values));
    Json side;
    side["sample_rate_hz"] = y.sample_rate_hz;
    side["channel_labels"] = y.channel_labels.empty() ? default_labels(y.channels()) : y.channel_labels;
    io::write_json(io::sidecar_path(csv_path), side);
}

// ----- ModelParams / Hyperparams ----------------------------------------------------------------

inline Json to_json(const ModelParams& t) {
    Json j;
    j["gamma"] = io::to_json(t.gamma);
    j["A"] = io::to_json(t.A);
    j["B"] = io::to_json(t.B);
    Json m = Json::array();
    for (int k : t.m) m.push_back(k + 1);
    j["m"] = m;
    j["c"] = io::to_json(t.c);
    j["tau"] = io::to_json(t.tau);
    j["mu"] = io::to_json(t.mu);
    j["p"] = io::to_json(t.p);
    return j;
}

inline ModelParams model_params_from_json(const Json& j, const std::string& where = "ModelParams") {
    ModelParams t;
    t.gamma = io::matrix_from(j, "gamma", where).cast<int>();
    t.A = io::matrix_from(j, "A", where);
    t.B = io::matrix_from(j, "B", where);
    for (int k : io::get_as<std::vector<int>>(j, "m", where)) t.m.push_back(k - 1);
    t.c = io::vector_from(j, "c", where);
    t.tau = io::vector_from(j, "tau", where);
    t.mu = io::vector_from(j, "mu", where);
    t.p = io::vector_from(j, "p", where);
    try {
        check_dimensions(t);
    } catch (const Error& e) {
        throw Error(where + ": " + e.what());
    }
    return t;
}

inline Json to_json(const Hyperparams& h) {
    Json j;
    j["l0"] = h.l0;
    j["u0"] = h.u0;
    j["xi0"] = h.xi0;
    j["xi1"] = h.xi1;
    j["rho0"] = h.rho0;
    j["alpha"] = io::to_json(h.alpha);
    return j;
}

// Missing fields keep their defaults; alpha may be a number (used for every cluster) or an array.
inline Hyperparams hyperparams_from_json(const Json& j, Hyperparams h, const std::string& where = "prior") {
    h.l0 = io::get_or(j, "l0", h.l0, where);
    h.u0 = io::get_or(j, "u0", h.u0, where);
    h.xi0 = io::get_or(j, "xi0", h.xi0, where);
    h.xi1 = io::get_or(j, "xi1", h.xi1, where);
    h.rho0 = io::get_or(j, "rho0", h.rho0, where);
    if (j.is_object() && j.contains("alpha")) {
        if (j["alpha"].is_number())
            h.alpha = Vector::Constant(std::max<Index>(1, h.alpha.size()), j["alpha"].get<double>());
        else
            h.alpha = io::vector_from(j, "alpha", where);
    }
    try {
        validate_hyperparams(h);
    } catch (const Error& e) {
        throw Error(where + ": " + e.what());
    }
    return h;
}

// ----- chain outputs and summaries -------------------------------------------------------------

inline Json to_json(const ChainOutput& c, bool with_traces = true) {
    Json j;
    j["n_retained"] = c.n_retained;
    j["gamma_sum"] = io::to_json(c.gamma_sum);
    j["same_cluster_sum"] = io::to_json(c.same_cluster_sum);
    if (with_traces && c.traces.size() > 0) {
        j["trace_names"] = c.trace_names;
        j["traces"] = io::to_json(c.traces);
    }
    return j;
}

inline ChainOutput chain_output_from_json(const Json& j, const std::string& where = "chain output") {
    ChainOutput c;
    c.n_retained = io::get_as<int>(j, "n_retained", where);
    c.gamma_sum = io::matrix_from(j, "gamma_sum", where).cast<int>();
    c.same_cluster_sum = io::matrix_from(j, "same_cluster_sum", where).cast<int>();
    if (j.contains("traces")) {
        c.traces = io::matrix_from(j, "traces", where);
        c.trace_names = io::get_as<std::vector<std::string>>(j, "trace_names", where);
    }
    return c;
}

inline Json to_json(const PosteriorSummary& s) {
    Json j;
    j["num_samples"] = s.num_samples;
    j["clust_prob"] = io::to_json(s.clust_prob);
    j["edge_prob"] = io::to_json(s.edge_prob);
    return j;
}

inline PosteriorSummary summary_from_json(const Json& j, const std::string& where = "summary") {
    PosteriorSummary s;
    s.num_samples = io::get_as<int>(j, "num_samples", where);
    s.clust_prob = io::matrix_from(j, "clust_prob", where);
    s.edge_prob = io::matrix_from(j, "edge_prob", where);
    if (s.clust_prob.rows() != s.clust_prob.cols() || s.edge_prob.rows() != s.edge_prob.cols() ||
        s.clust_prob.rows() != s.edge_prob.rows())
        throw Error(where + ": clust_prob and edge_prob must be square matrices of equal size");
    return s;
}

inline Json to_json(const NetworkEstimate& n) {
    Json j;
    Json cl = Json::array();
    for (const auto& c : n.clusters) {
        Json ids = Json::array();
        for (Index i : c) ids.push_back(i + 1);
        cl.push_back(ids);
    }
    j["clusters"] = cl;
    Json ed = Json::array();
    for (const auto& e : n.edges) ed.push_back(Json::array({e.from + 1, e.to + 1}));
    j["edges"] = ed;
    j["thresholds"] = {{"threshold_m", n.threshold_m}, {"threshold_gamma", n.threshold_gamma}};
    return j;
}

inline std::string edges_csv(const NetworkEstimate& n, const PosteriorSummary& s) {
    std::string out = "from,to,probability\n";
    for (const auto& e : n.edges)
        out += std::to_string(e.from + 1) + "," + std::to_string(e.to + 1) + "," + io::format_double(s.edge_prob(e.to, e.from)) + "\n";
    return out;
}

inline std::string membership_csv(const NetworkEstimate& n) {
    std::vector<std::pair<Index, Index>> rows;
    for (size_t k = 0; k < n.clusters.size(); ++k)
        for (Index i : n.clusters[k]) rows.emplace_back(i, static_cast<Index>(k));
    std::sort(rows.begin(), rows.end());
    std::string out = "node,cluster\n";
    for (const auto& [i, k] : rows) out += std::to_string(i + 1) + "," + std::to_string(k + 1) + "\n";
    return out;
}

inline Json to_json(const EmResult& r) {
    Json j;
    j["K_selected"] = r.K_selected;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["theta"] = to_json(r.theta);
    return j;
}

inline std::string trace_csv(const std::vector<double>& trace) {
    std::string out = "iteration,objective\n";
    for (size_t k = 0; k < trace.size(); ++k) out += std::to_string(k) + "," + io::format_double(trace[k]) + "\n";
    return out;
}

// ----- simulation truth and ROC ------------------------------------------------------------------

inline Json to_json(const GroundTruth& g) {
    Json j;
    j["cluster_sizes"] = g.cluster_sizes;
    Json labels = Json::array();
    for (int k : g.labels) labels.push_back(k + 1);
    j["labels"] = labels;
    Json edges = Json::array();
    for (Index i = 0; i < g.d(); ++i)
        for (Index j2 = 0; j2 < g.d(); ++j2)
            if (g.adjacency(i, j2)) edges.push_back(Json::array({j2 + 1, i + 1}));
    j["true_edges"] = edges;
    j["lag_coeffs"] = Json::array({io::to_json(g.lag_coeffs[0]), io::to_json(g.lag_coeffs[1]), io::to_json(g.lag_coeffs[2])});
    j["gains"] = io::to_json(g.gains);
    j["noise_scale"] = io::to_json(g.noise_scale);
    j["sigma_state"] = io::to_json(g.sigma_state);
    j["sigma_obs"] = io::to_json(g.sigma_obs);
    return j;
}

inline GroundTruth truth_from_json(const Json& j, const std::string& where = "truth") {
    GroundTruth g;
    g.cluster_sizes = io::get_as<std::vector<int>>(j, "cluster_sizes", where);
    Index d = 0;
    for (int s : g.cluster_sizes) {
        if (s < 1) throw Error(where + ": field 'cluster_sizes' must hold positive integers");
        d += s;
    }
    for (int k : io::get_as<std::vector<int>>(j, "labels", where)) g.labels.push_back(k - 1);
    if (static_cast<Index>(g.labels.size()) != d) throw Error(where + ": field 'labels' must have one entry per node");
    g.adjacency = IMatrix::Zero(d, d);
    for (const auto& e : io::field(j, "true_edges", where)) {
        if (!e.is_array() || e.size() != 2) throw Error(where + ": field 'true_edges' must hold [from,to] pairs");
        const Index from = e[0].get<Index>() - 1, to = e[1].get<Index>() - 1;
        if (from < 0 || to < 0 || from >= d || to >= d) throw Error(where + ": field 'true_edges' has a node out of range");
        g.adjacency(to, from) = 1;
    }
    if (j.contains("lag_coeffs")) {
        const Json& lc = j["lag_coeffs"];
        if (!lc.is_array() || lc.size() != 3) throw Error(where + ": field 'lag_coeffs' must hold three matrices");
        for (size_t k = 0; k < 3; ++k) g.lag_coeffs[k] = io::matrix_from(Json{{"m", lc[k]}}, "m", where + ".lag_coeffs");
    }
    if (j.contains("gains")) g.gains = io::vector_from(j, "gains", where);
    if (j.contains("noise_scale")) g.noise_scale = io::vector_from(j, "noise_scale", where);
    if (j.contains("sigma_state")) g.sigma_state = io::matrix_from(j, "sigma_state", where);
    if (j.contains("sigma_obs")) g.sigma_obs = io::matrix_from(j, "sigma_obs", where);
    return g;
}

inline std::string roc_csv(const RocCurve& rc) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : rc.points)
        out += (std::isinf(p.threshold) ? std::string("inf") : io::format_double(p.threshold)) + "," +
               io::format_double(p.fpr) + "," + io::format_double(p.tpr) + "\n";
    return out;
}

}  // namespace ssmar
