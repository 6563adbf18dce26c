#pragma once

// Recording preprocessing: zero-phase anti-aliased decimation, forward-backward IIR notch and
// removal of the first principal component.

#include "ssmar/core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace ssmar {

namespace detail {

// Odd (point-symmetric) extension of x by n samples on each side.
inline Vector odd_extend(const Eigen::Ref<const Vector>& x, Index n) {
    const Index T = x.size();
    n = std::min(n, T - 1);
    Vector out(T + 2 * n);
    for (Index k = 0; k < n; ++k) {
        out(k) = 2.0 * x(0) - x(n - k);
        out(T + n + k) = 2.0 * x(T - 1) - x(T - 2 - k);
    }
    out.segment(n, T) = x;
    return out;
}

// Kaiser-window low-pass FIR; cutoff and transition are fractions of the sampling rate.
inline Vector kaiser_lowpass(double cutoff, double transition, double atten_db) {
    const double beta = atten_db > 50.0   ? 0.1102 * (atten_db - 8.7)
                        : atten_db > 21.0 ? 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0)
                                          : 0.0;
    Index n = static_cast<Index>(std::ceil((atten_db - 7.95) / (2.285 * 2.0 * std::numbers::pi * transition))) + 1;
    if (n % 2 == 0) ++n;
    const Index half = n / 2;
    Vector h(n);
    const double i0b = std::cyl_bessel_i(0.0, beta);
    for (Index k = 0; k < n; ++k) {
        const double m = static_cast<double>(k - half);
        const double arg = 2.0 * cutoff * m;
        const double sinc = m == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
        const double r = m / static_cast<double>(half);
        const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h(k) = 2.0 * cutoff * sinc * w;
    }
    return h / h.sum();  // unit DC gain
}

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Direct form II transposed pass, started in the steady state for a constant input x(0).
inline void biquad_pass(const Biquad& f, Vector& x) {
    const double dc = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
    double z2 = (f.b2 - f.a2 * dc) * x(0);
    double z1 = (f.b1 - f.a1 * dc) * x(0) + z2;
    for (Index t = 0; t < x.size(); ++t) {
        const double in = x(t);
        const double out = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * out + z2;
        z2 = f.b2 * in - f.a2 * out;
        x(t) = out;
    }
}

}  // namespace detail

// Notch coefficients for centre frequency f0 and quality factor q (bandwidth f0/q).
inline detail::Biquad notch_coefficients(double f0, double q, double fs) {
    const double w0 = 2.0 * std::numbers::pi * f0 / fs;
    const double beta = std::tan(0.5 * w0 / q);
    const double g = 1.0 / (1.0 + beta);
    const double c = std::cos(w0);
    return {g, -2.0 * g * c, g, -2.0 * g * c, 2.0 * g - 1.0};
}

// Magnitude response of the forward-backward notch (squared single-pass magnitude).
inline double notch_response(double f, double f0, double q, double fs) {
    const auto b = notch_coefficients(f0, q, fs);
    const double w = 2.0 * std::numbers::pi * f / fs;
    const std::complex<double> z = std::polar(1.0, -w);
    const std::complex<double> num = b.b0 + b.b1 * z + b.b2 * z * z;
    const std::complex<double> den = 1.0 + b.a1 * z + b.a2 * z * z;
    return std::norm(num / den);
}

inline TimeSeriesMatrix notch_filter(const TimeSeriesMatrix& y, double freq_hz, double q = 30.0) {
    const double fs = y.sample_rate_hz;
    if (!(freq_hz > 0.0 && freq_hz < 0.5 * fs))
        throw Error("notch_filter: frequency " + std::to_string(freq_hz) + " Hz must lie in (0, Nyquist=" +
                    std::to_string(0.5 * fs) + " Hz)");
    if (!(q > 0.0)) throw Error("notch_filter: q must be positive");
    const auto f = notch_coefficients(freq_hz, q, fs);
    // Pad by about seven pole time constants so the edge transient decays before the data.
    const double radius = std::sqrt(std::max(0.0, f.a2));
    const Index pad = static_cast<Index>(std::ceil(7.0 / std::max(1e-6, 1.0 - radius))) + 6;
    TimeSeriesMatrix out = y;
    if (y.length() < 2) return out;
    for (Index i = 0; i < y.channels(); ++i) {
        const Vector row = y.values.row(i).transpose();
        Vector ext = detail::odd_extend(row, pad);
        const Index n = (ext.size() - row.size()) / 2;
        detail::biquad_pass(f, ext);
        ext.reverseInPlace();
        detail::biquad_pass(f, ext);
        ext.reverseInPlace();
        out.values.row(i) = ext.segment(n, row.size()).transpose();
    }
    return out;
}

inline TimeSeriesMatrix downsample(const TimeSeriesMatrix& y, double target_hz) {
    if (!(target_hz > 0.0)) throw Error("downsample: target rate must be positive");
    const double ratio = y.sample_rate_hz / target_hz;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
        throw Error("downsample: " + std::to_string(y.sample_rate_hz) + " Hz is not an integer multiple of " +
                    std::to_string(target_hz) + " Hz");
    const Index factor = static_cast<Index>(rounded);
    if (factor == 1) return y;

    const double fs = y.sample_rate_hz;
    const Vector h = detail::kaiser_lowpass(0.4 * target_hz / fs, 0.1 * target_hz / fs, 60.0);
    const Index half = h.size() / 2;
    const Index T = y.length();
    const Index n_out = (T + factor - 1) / factor;
    TimeSeriesMatrix out = y;
    out.sample_rate_hz = target_hz;
    out.values.resize(y.channels(), n_out);
    for (Index i = 0; i < y.channels(); ++i) {
        const Vector row = y.values.row(i).transpose();
        const Vector ext = detail::odd_extend(row, half);
        const Index n = (ext.size() - T) / 2;
        for (Index k = 0; k < n_out; ++k) {
            const Index centre = k * factor + n;
            double acc = 0.0;
            for (Index m = 0; m < h.size(); ++m) {
                const Index idx = centre + m - half;
                if (idx >= 0 && idx < ext.size()) acc += h(m) * ext(idx);
            }
            out.values(i, k) = acc;
        }
    }
    return out;
}

inline TimeSeriesMatrix remove_first_pc(const TimeSeriesMatrix& y) {
    if (y.channels() < 2) throw Error("remove_first_pc: need at least 2 channels");
    Matrix z = y.values;
    z.colwise() -= z.rowwise().mean();
    const double scale = z.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw Error("remove_first_pc: input has rank 0 after centering");
    const Matrix cov = z * z.transpose() / static_cast<double>(std::max<Index>(1, y.length() - 1));
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    const Vector v = es.eigenvectors().col(cov.rows() - 1);
    TimeSeriesMatrix out = y;
    out.values = z - v * (v.transpose() * z);
    return out;
}

}  // namespace ssmar
