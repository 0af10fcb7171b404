#pragma once

// Discrete Fourier analysis, the DOWNSAMPLE / ALIAS operator pair and
// Butterworth low-pass filters realized as second-order-section cascades.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "msdon/error.hpp"

namespace msdon {

using cplx = std::complex<double>;

struct Spectrum {
    std::vector<cplx> bins;
    double sample_rate = 1.0; // Hz of the originating signal

    std::size_t size() const { return bins.size(); }
    // Frequency of bin k in Hz (k < N/2 maps to positive frequencies).
    double frequency(std::size_t k) const
    {
        return sample_rate * static_cast<double>(k) / static_cast<double>(bins.size());
    }
};

namespace detail {

inline std::size_t smallest_factor(std::size_t n)
{
    if (n % 2 == 0) return 2;
    for (std::size_t f = 3; f * f <= n; f += 2)
        if (n % f == 0) return f;
    return n;
}

// Mixed-radix decimation in time. Prime lengths fall back to the direct sum.
inline void fft_rec(const cplx* in, std::size_t stride, std::size_t n, cplx* out, double sign)
{
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = smallest_factor(n);
    if (p == n) {
        for (std::size_t k = 0; k < n; ++k) {
            cplx acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
                acc += in[j * stride] * cplx(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        return;
    }
    const std::size_t m = n / p;
    std::vector<cplx> sub(n);
    for (std::size_t r = 0; r < p; ++r) fft_rec(in + r * stride, stride * p, m, sub.data() + r * m, sign);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (std::size_t r = 0; r < p; ++r) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((r * k) % n) / static_cast<double>(n);
            acc += sub[r * m + (k % m)] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
}

} // namespace detail

// X(k) = sum_n x(n) exp(-2 pi i k n / N).
inline Spectrum dft(std::span<const cplx> x, double sample_rate = 1.0)
{
    if (x.empty()) throw InvalidArgument("dft: empty input");
    Spectrum s;
    s.sample_rate = sample_rate;
    s.bins.resize(x.size());
    detail::fft_rec(x.data(), 1, x.size(), s.bins.data(), -1.0);
    return s;
}

inline Spectrum dft(std::span<const double> x, double sample_rate = 1.0)
{
    std::vector<cplx> c(x.begin(), x.end());
    return dft(std::span<const cplx>(c), sample_rate);
}

inline std::vector<cplx> idft(const Spectrum& s)
{
    if (s.bins.empty()) throw InvalidArgument("idft: empty spectrum");
    std::vector<cplx> out(s.bins.size());
    detail::fft_rec(s.bins.data(), 1, s.bins.size(), out.data(), 1.0);
    const double inv = 1.0 / static_cast<double>(s.bins.size());
    for (auto& v : out) v *= inv;
    return out;
}

inline std::vector<double> idft_real(const Spectrum& s)
{
    const auto c = idft(s);
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

// Single-sided amplitude spectrum |X(k)| for k = 0..N/2.
inline std::vector<double> amplitude_spectrum(std::span<const double> x)
{
    const Spectrum s = dft(x);
    std::vector<double> out(s.size() / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(s.bins[k]);
    return out;
}

// DOWNSAMPLE_L(x)(m) = x(mL).
template <class T>
std::vector<T> downsample(std::span<const T> x, std::size_t factor)
{
    if (factor == 0) throw InvalidArgument("downsample: factor must be positive");
    if (x.empty() || x.size() % factor != 0)
        throw InvalidArgument("downsample: factor " + std::to_string(factor) + " does not divide length " +
                              std::to_string(x.size()));
    std::vector<T> out(x.size() / factor);
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = x[m * factor];
    return out;
}

inline std::vector<double> downsample(const std::vector<double>& x, std::size_t factor)
{
    return downsample(std::span<const double>(x), factor);
}

// ALIAS_L(X)(m) = sum_{l<L} X(m + l M), N = L M.
inline Spectrum alias(const Spectrum& spec, std::size_t factor)
{
    const std::size_t n = spec.size();
    if (factor == 0) throw InvalidArgument("alias: factor must be positive");
    if (n == 0 || n % factor != 0)
        throw InvalidArgument("alias: factor " + std::to_string(factor) + " does not divide length " +
                              std::to_string(n));
    const std::size_t m = n / factor;
    Spectrum out;
    out.sample_rate = spec.sample_rate / static_cast<double>(factor);
    out.bins.assign(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l < factor; ++l) out.bins[k] += spec.bins[k + l * m];
    return out;
}

// max_k | DFT(DOWNSAMPLE_L x)(k) - ALIAS_L(DFT x)(k) / L |
inline double verify_downsampling_theorem(std::span<const cplx> x, std::size_t factor)
{
    const Spectrum lhs = dft(std::span<const cplx>(downsample(x, factor)));
    const Spectrum rhs = alias(dft(x), factor);
    double dev = 0.0;
    for (std::size_t k = 0; k < lhs.size(); ++k)
        dev = std::max(dev, std::abs(lhs.bins[k] - rhs.bins[k] / static_cast<double>(factor)));
    return dev;
}

inline double verify_downsampling_theorem(std::span<const double> x, std::size_t factor)
{
    std::vector<cplx> c(x.begin(), x.end());
    return verify_downsampling_theorem(std::span<const cplx>(c), factor);
}

// ---------------------------------------------------------------------------
// Butterworth filters

enum class FilterKind { analog, digital };

// Analog:  H(s) = (b0 + b1 s + b2 s^2) / (a0 + a1 s + a2 s^2)
// Digital: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
// First-order sections leave b2 = a2 = 0.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{};
};

struct ButterworthFilter {
    int order = 1;
    double cutoff = 1.0; // rad/s (analog) or rad/sample in (0, pi) (digital)
    FilterKind kind = FilterKind::digital;
    std::vector<Biquad> sections;
    std::vector<cplx> poles; // s-plane (analog) or z-plane (digital)

    // Frequency response at omega: rad/s for analog, rad/sample for digital.
    cplx response(double omega) const
    {
        cplx h = 1.0;
        if (kind == FilterKind::analog) {
            const cplx s(0.0, omega);
            for (const auto& q : sections)
                h *= (q.b[0] + q.b[1] * s + q.b[2] * s * s) / (q.a[0] + q.a[1] * s + q.a[2] * s * s);
        } else {
            const cplx zi = std::exp(cplx(0.0, -omega));
            for (const auto& q : sections)
                h *= (q.b[0] + q.b[1] * zi + q.b[2] * zi * zi) / (q.a[0] + q.a[1] * zi + q.a[2] * zi * zi);
        }
        return h;
    }

    double magnitude_squared(double omega) const { return std::norm(response(omega)); }
};

// Closed-form magnitude laws the designs must reproduce.
inline double butterworth_analog_magnitude_squared(int order, double cutoff, double omega)
{
    return 1.0 / (1.0 + std::pow(omega / cutoff, 2.0 * order));
}

inline double butterworth_digital_magnitude_squared(int order, double cutoff, double omega)
{
    return 1.0 / (1.0 + std::pow(std::tan(omega / 2.0) / std::tan(cutoff / 2.0), 2.0 * order));
}

namespace detail {

// Left-half-plane Butterworth poles on the circle of radius wc:
// s_k = wc exp(i pi (2k + N + 1) / (2N)), k = 0..N-1.
inline std::vector<cplx> butterworth_analog_poles(int order, double wc)
{
    std::vector<cplx> poles;
    for (int k = 0; k < order; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
        poles.push_back(wc * std::exp(cplx(0.0, theta)));
    }
    return poles;
}

} // namespace detail

inline ButterworthFilter butterworth_design(int order, double cutoff, FilterKind kind)
{
    if (order < 1) throw InvalidArgument("butterworth_design: order must be >= 1");
    if (kind == FilterKind::analog) {
        if (!(cutoff > 0.0) || !std::isfinite(cutoff))
            throw InvalidArgument("butterworth_design: analog cutoff must be positive");
    } else if (!(cutoff > 0.0 && cutoff < std::numbers::pi)) {
        throw InvalidArgument("butterworth_design: digital cutoff must lie in (0, pi) rad/sample");
    }

    ButterworthFilter f;
    f.order = order;
    f.cutoff = cutoff;
    f.kind = kind;

    // Digital designs pre-warp so the bilinear map lands the cutoff exactly.
    const double wc = kind == FilterKind::analog ? cutoff : 2.0 * std::tan(cutoff / 2.0);
    const auto analog = detail::butterworth_analog_poles(order, wc);

    // Conjugate pairs are k and N-1-k; the middle pole is real when N is odd.
    for (int k = 0; k < order / 2; ++k) {
        const cplx p = analog[static_cast<std::size_t>(k)];
        Biquad q;
        if (kind == FilterKind::analog) {
            q.b = {wc * wc, 0.0, 0.0};
            q.a = {std::norm(p), -2.0 * p.real(), 1.0};
            f.poles.push_back(p);
            f.poles.push_back(std::conj(p));
        } else {
            const cplx z = (2.0 + p) / (2.0 - p);
            const double a1 = -2.0 * z.real(), a2 = std::norm(z);
            const double g = (1.0 + a1 + a2) / 4.0; // unit gain at z = 1
            q.b = {g, 2.0 * g, g};
            q.a = {1.0, a1, a2};
            f.poles.push_back(z);
            f.poles.push_back(std::conj(z));
        }
        f.sections.push_back(q);
    }
    if (order % 2 == 1) {
        Biquad q;
        if (kind == FilterKind::analog) {
            q.b = {wc, 0.0, 0.0};
            q.a = {wc, 1.0, 0.0};
            f.poles.emplace_back(-wc, 0.0);
        } else {
            const double z = (2.0 - wc) / (2.0 + wc);
            const double g = (1.0 - z) / 2.0;
            q.b = {g, g, 0.0};
            q.a = {1.0, -z, 0.0};
            f.poles.emplace_back(z, 0.0);
        }
        f.sections.push_back(q);
    }
    return f;
}

// Digital low-pass with the cutoff given in Hz at the given sample rate.
inline ButterworthFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate)
{
    if (!(sample_rate > 0.0)) throw InvalidArgument("butterworth_lowpass: sample rate must be positive");
    if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0))
        throw InvalidArgument("butterworth_lowpass: cutoff must lie below the Nyquist frequency");
    return butterworth_design(order, 2.0 * std::numbers::pi * cutoff_hz / sample_rate, FilterKind::digital);
}

namespace detail {

// Transposed direct form II, in place. With steady_start each section begins
// in the state it would hold after a long constant input equal to x[0].
inline void sos_run(const std::vector<Biquad>& sections, std::vector<double>& x, bool steady_start = false)
{
    for (const auto& q : sections) {
        double s1 = 0.0, s2 = 0.0;
        if (steady_start && !x.empty()) {
            const double u = x.front();
            const double y = u * (q.b[0] + q.b[1] + q.b[2]) / (1.0 + q.a[1] + q.a[2]);
            s2 = q.b[2] * u - q.a[2] * y;
            s1 = y - q.b[0] * u;
        }
        for (double& v : x) {
            const double in = v;
            const double out = q.b[0] * in + s1;
            s1 = q.b[1] * in - q.a[1] * out + s2;
            s2 = q.b[2] * in - q.a[2] * out;
            v = out;
        }
    }
}

} // namespace detail

// Cascaded-section recursion. zero_phase runs forward then backward over an
// odd-reflected extension of the signal, giving |H|^2 with no phase shift.
inline std::vector<double> filter_apply(const ButterworthFilter& filter, std::span<const double> x, bool zero_phase)
{
    if (filter.kind != FilterKind::digital) throw InvalidArgument("filter_apply: only digital filters can be applied");
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidArgument("filter_apply: non-finite input");
    if (x.empty()) return {};
    if (!zero_phase) {
        std::vector<double> y(x.begin(), x.end());
        detail::sos_run(filter.sections, y);
        return y;
    }

    const std::size_t n = x.size();
    const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * filter.sections.size() + 1));
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    detail::sos_run(filter.sections, ext, true);
    std::reverse(ext.begin(), ext.end());
    detail::sos_run(filter.sections, ext, true);
    std::reverse(ext.begin(), ext.end());
    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

// Cutoff used ahead of decimation by L: half of the post-decimation Nyquist
// frequency, i.e. pi / (2L) rad/sample at the original rate.
inline double antialias_cutoff(std::size_t factor) { return std::numbers::pi / (2.0 * static_cast<double>(factor)); }

inline std::vector<double> antialias_downsample(std::span<const double> x, std::size_t factor, int order)
{
    if (factor == 0) throw InvalidArgument("antialias_downsample: factor must be positive");
    if (x.empty() || x.size() % factor != 0)
        throw InvalidArgument("antialias_downsample: factor " + std::to_string(factor) + " does not divide length " +
                              std::to_string(x.size()));
    const ButterworthFilter lp = butterworth_design(order, antialias_cutoff(factor), FilterKind::digital);
    const std::vector<double> y = filter_apply(lp, x, true);
    return downsample(std::span<const double>(y), factor);
}

} // namespace msdon
