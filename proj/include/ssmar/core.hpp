#pragma once

// Domain types shared by every part of the library.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IMatrix = Eigen::MatrixXi;
using Index = Eigen::Index;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Observed recordings: d channels (rows) by T time points (columns).
struct TimeSeriesMatrix {
    Matrix values;
    double sample_rate_hz = 1.0;
    std::vector<std::string> channel_labels;

    Index channels() const { return values.rows(); }
    Index length() const { return values.cols(); }
};

inline std::vector<std::string> default_labels(Index d) {
    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(d));
    for (Index i = 0; i < d; ++i) out.push_back("ch" + std::to_string(i + 1));
    return out;
}

inline TimeSeriesMatrix make_series(Matrix values, double fs, std::vector<std::string> labels = {}) {
    TimeSeriesMatrix y;
    if (labels.empty()) labels = default_labels(values.rows());
    y.values = std::move(values);
    y.sample_rate_hz = fs;
    y.channel_labels = std::move(labels);
    return y;
}

// Enforces the invariants required by model fitting (d >= 2, T >= 2, finite).
inline void validate_series(const TimeSeriesMatrix& y) {
    if (y.channels() < 2) throw Error("time series needs at least 2 channels, got " + std::to_string(y.channels()));
    if (y.length() < 2) throw Error("time series needs at least 2 time points, got " + std::to_string(y.length()));
    if (!(y.sample_rate_hz > 0.0)) throw Error("sample_rate_hz must be positive");
    if (!y.channel_labels.empty() && static_cast<Index>(y.channel_labels.size()) != y.channels())
        throw Error("channel_labels has " + std::to_string(y.channel_labels.size()) + " entries for " +
                    std::to_string(y.channels()) + " channels");
    if (!y.values.allFinite()) throw Error("time series contains non-finite values");
}

// Latent states x(0..T): d rows by T+1 columns, column 0 is x(0).
using LatentStates = Matrix;

struct Hyperparams {
    double l0 = 0.9;
    double u0 = 0.1;
    double xi0 = 1.0;   // std. dev. of the connection-coefficient prior
    double xi1 = 10.0;  // std. dev. of the gain and initial-mean priors
    double rho0 = 0.01; // shape and scale of the noise-variance prior
    Vector alpha;       // Dirichlet concentration, length K

    Index K() const { return alpha.size(); }
};

inline Hyperparams default_hyperparams(Index K) {
    if (K < 1) throw Error("K must be at least 1");
    Hyperparams h;
    h.alpha = Vector::Ones(K);
    return h;
}

inline void validate_hyperparams(const Hyperparams& h) {
    if (!(h.l0 > 0.0 && h.l0 < 1.0)) throw Error("l0 must lie in (0,1)");
    if (!(h.u0 > 0.0 && h.u0 < 1.0)) throw Error("u0 must lie in (0,1)");
    if (!(h.u0 < h.l0)) throw Error("u0 must be smaller than l0");
    if (!(h.xi0 > 0.0)) throw Error("xi0 must be positive");
    if (!(h.xi1 > 0.0)) throw Error("xi1 must be positive");
    if (!(h.rho0 > 0.0)) throw Error("rho0 must be positive");
    if (h.alpha.size() < 1 || (h.alpha.array() <= 0.0).any()) throw Error("alpha must be a nonempty positive vector");
}

// Full parameter set. Cluster labels are stored 0-based (0..K-1); the JSON form is 1-based.
// gamma(i,j) = 1 encodes the edge j -> i.
struct ModelParams {
    IMatrix gamma;
    Matrix A;
    Matrix B;
    std::vector<int> m;
    Vector c;
    Vector tau;
    Vector mu;
    Vector p;

    Index d() const { return A.rows(); }
    Index K() const { return B.rows(); }

    // Effective transition matrix Gamma .* A.
    Matrix transition() const { return gamma.cast<double>().cwiseProduct(A); }

    // One-hot K x d membership matrix.
    Matrix membership() const {
        Matrix M = Matrix::Zero(K(), d());
        for (Index i = 0; i < d(); ++i) M(m[static_cast<size_t>(i)], i) = 1.0;
        return M;
    }
};

inline void check_dimensions(const ModelParams& t) {
    const Index d = t.d();
    const Index K = t.K();
    auto bad = [](const std::string& what) { throw Error("ModelParams: " + what); };
    if (d < 1) bad("d must be positive");
    if (t.A.cols() != d) bad("A must be square");
    if (t.gamma.rows() != d || t.gamma.cols() != d) bad("gamma must be d x d");
    if (K < 1 || t.B.cols() != K) bad("B must be K x K");
    if (static_cast<Index>(t.m.size()) != d) bad("m must have length d");
    if (t.c.size() != d || t.tau.size() != d || t.mu.size() != d) bad("c, tau, mu must have length d");
    if (t.p.size() != K) bad("p must have length K");
    for (int k : t.m)
        if (k < 0 || k >= K) bad("cluster label out of range");
}

// Returns an empty string when theta satisfies every support constraint, else a description.
inline std::string support_violation(const ModelParams& t, const Hyperparams& h) {
    const Index d = t.d();
    const Index K = t.K();
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (t.gamma(i, j) != 0 && t.gamma(i, j) != 1) return "gamma entries must be 0 or 1";
    for (Index a = 0; a < K; ++a) {
        for (Index b = 0; b < K; ++b) {
            const double v = t.B(a, b);
            if (!std::isfinite(v)) return "B has a non-finite entry";
            if (a == b && (v < h.l0 || v > 1.0)) return "diagonal B entry outside [l0, 1]";
            if (a != b && (v < 0.0 || v > h.u0)) return "off-diagonal B entry outside [0, u0]";
        }
    }
    if ((t.tau.array() <= 0.0).any() || !t.tau.allFinite()) return "tau must be positive";
    if ((t.p.array() < 0.0).any() || std::abs(t.p.sum() - 1.0) > 1e-9) return "p must lie on the simplex";
    if (!t.A.allFinite() || !t.c.allFinite() || !t.mu.allFinite()) return "non-finite A, c or mu";
    return {};
}

// x * log(y) with the 0 * log(0) = 0 convention.
inline double xlogy(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log(y);
}

// x * log(1 - y) with the same convention.
inline double xlog1my(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log1p(-y);
}

inline double normal_logpdf(double x, double mean, double var) {
    const double r = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

}  // namespace ssmar
