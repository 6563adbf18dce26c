#pragma once

// Random variate generation on top of a seeded 64-bit Mersenne twister.

#include "ssmar/core.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace ssmar {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unif_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return norm_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    double gamma(double shape, double scale = 1.0) {
        return std::gamma_distribution<double>(shape, scale)(engine_);
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    // Inverse gamma with density proportional to v^{-(shape+1)} exp(-scale / v).
    double inverse_gamma(double shape, double scale) { return scale / gamma(shape); }

    bool bernoulli(double q) { return uniform() < q; }

    Vector normal_vector(Index n) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    Vector dirichlet(const Vector& alpha) {
        Vector g(alpha.size());
        for (Index k = 0; k < alpha.size(); ++k) g(k) = gamma(alpha(k));
        return g / g.sum();
    }

    // Index drawn with probability proportional to exp(logw).
    Index categorical_log(const Vector& logw) {
        const double mx = logw.maxCoeff();
        Vector w = (logw.array() - mx).exp();
        double u = uniform() * w.sum();
        for (Index k = 0; k < w.size(); ++k) {
            u -= w(k);
            if (u < 0.0) return k;
        }
        for (Index k = w.size() - 1; k >= 0; --k)
            if (w(k) > 0.0) return k;
        return 0;
    }

    std::uint64_t next_u64() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

// Seed for job `index` derived from a base seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace detail {

// Draw from exp(h0 + s * (x - x0)) restricted to [lo, hi].
inline double sample_exponential_piece(double s, double lo, double hi, double u) {
    const double w = hi - lo;
    if (std::abs(s) * w < 1e-12) return lo + u * w;
    if (s < 0.0) return lo + std::log((1.0 - u) + u * std::exp(s * w)) / s;
    return hi + std::log((1.0 - u) + u * std::exp(-s * w)) / s;
}

// log of the integral of exp(hl + s * (x - lo)) over [lo, hi].
inline double log_exponential_mass(double hl, double s, double lo, double hi) {
    const double w = hi - lo;
    if (w <= 0.0) return kNegInf;
    if (std::abs(s) * w < 1e-12) return hl + std::log(w);
    if (s > 0.0) return hl + s * w + std::log(-std::expm1(-s * w)) - std::log(s);
    return hl + std::log(-std::expm1(s * w)) - std::log(-s);
}

}  // namespace detail

// Adaptive rejection sampling for a log-concave density on the bounded interval [lo, hi].
// logf and dlogf must be finite at every abscissa in `init` (which must lie inside the interval).
inline double sample_log_concave(const std::function<double(double)>& logf,
                                 const std::function<double(double)>& dlogf, double lo, double hi,
                                 std::vector<double> init, Rng& rng, int max_points = 64) {
    struct Point {
        double x, h, dh;
    };
    std::sort(init.begin(), init.end());
    init.erase(std::unique(init.begin(), init.end()), init.end());
    std::vector<Point> pts;
    for (double x : init) pts.push_back({x, logf(x), dlogf(x)});
    if (pts.empty()) throw Error("sample_log_concave: no initial abscissae");

    for (int attempt = 0; attempt < 100000; ++attempt) {
        const size_t n = pts.size();
        // Breakpoints between consecutive tangents.
        std::vector<double> z(n + 1);
        z[0] = lo;
        z[n] = hi;
        for (size_t k = 0; k + 1 < n; ++k) {
            const Point& a = pts[k];
            const Point& b = pts[k + 1];
            const double ds = a.dh - b.dh;
            double zk;
            if (std::abs(ds) < 1e-300) {
                zk = 0.5 * (a.x + b.x);
            } else {
                zk = (b.h - a.h - b.x * b.dh + a.x * a.dh) / ds;
            }
            z[k + 1] = std::clamp(zk, a.x, b.x);
        }
        std::vector<double> logmass(n);
        double mx = kNegInf;
        for (size_t k = 0; k < n; ++k) {
            const Point& p = pts[k];
            const double hl = p.h + p.dh * (z[k] - p.x);
            logmass[k] = detail::log_exponential_mass(hl, p.dh, z[k], z[k + 1]);
            mx = std::max(mx, logmass[k]);
        }
        double total = 0.0;
        for (size_t k = 0; k < n; ++k) total += std::exp(logmass[k] - mx);
        double u = rng.uniform() * total;
        size_t seg = n - 1;
        for (size_t k = 0; k < n; ++k) {
            u -= std::exp(logmass[k] - mx);
            if (u < 0.0) {
                seg = k;
                break;
            }
        }
        const Point& p = pts[seg];
        double x = detail::sample_exponential_piece(p.dh, z[seg], z[seg + 1], rng.uniform());
        x = std::clamp(x, z[seg], z[seg + 1]);
        const double upper = p.h + p.dh * (x - p.x);
        const double hx = logf(x);
        if (std::log(rng.uniform()) <= hx - upper) return x;
        if (static_cast<int>(pts.size()) < max_points && x > lo && x < hi && std::isfinite(hx)) {
            Point q{x, hx, dlogf(x)};
            auto it = std::lower_bound(pts.begin(), pts.end(), x, [](const Point& a, double v) { return a.x < v; });
            if (it == pts.end() || it->x != x) pts.insert(it, q);
        }
    }
    throw Error("sample_log_concave: rejection sampler failed to accept");
}

// Beta(a, b) truncated to [lo, hi] with a, b >= 1 (log-concave case).
inline double sample_truncated_beta(double a, double b, double lo, double hi, Rng& rng) {
    if (!(a >= 1.0 && b >= 1.0)) throw Error("sample_truncated_beta requires a, b >= 1");
    if (!(lo < hi)) throw Error("sample_truncated_beta requires lo < hi");
    if (a == 1.0 && b == 1.0) return rng.uniform(lo, hi);
    auto logf = [a, b](double x) { return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x); };
    auto dlogf = [a, b](double x) { return (a - 1.0) / x - (b - 1.0) / (1.0 - x); };
    // Abscissae strictly inside the interval, bracketing the mode when it lies inside.
    const double w = hi - lo;
    std::vector<double> init{lo + 1e-3 * w, lo + 0.5 * w, hi - 1e-3 * w};
    const double mode = (a - 1.0) / (a + b - 2.0);
    if (mode > lo && mode < hi) {
        const double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
        for (double x : {mode - sd, mode, mode + sd})
            if (x > lo && x < hi) init.push_back(x);
    }
    return sample_log_concave(logf, dlogf, lo, hi, std::move(init), rng);
}

}  // namespace ssmar
