#pragma once

// Synthetic nonstationary ground-motion records and CSV record I/O.
//
// A record is unit-RMS Kanai-Tajimi filtered white noise, shaped by a
// rise / plateau / exponential-decay amplitude envelope, scaled by the
// intensity and finally made zero-mean by subtracting an envelope-shaped
// correction (which keeps both ends of the record at zero).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msdon/csv.hpp"
#include "msdon/dsp.hpp"
#include "msdon/error.hpp"
#include "msdon/time_series.hpp"

namespace msdon {

struct GenerationConfig {
    double duration = 40.0; // s
    double dt = 0.005;      // s
    // envelope
    double rise_time = 4.0;     // s, quadratic build-up
    double plateau_time = 12.0; // s, strong-motion phase
    double decay_rate = 0.35;   // 1/s, exponential coda
    // Kanai-Tajimi spectrum
    double omega_g = 2.0 * std::numbers::pi * 2.5; // rad/s
    double zeta_g = 0.6;
    double intensity = 1.0; // m/s^2, RMS over the plateau
    std::uint64_t seed = 0;

    std::size_t n_samples() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

    void validate() const
    {
        auto bad = [](const std::string& what) { throw InvalidArgument("GenerationConfig: " + what); };
        if (!(duration > 0.0) || !std::isfinite(duration)) bad("duration must be positive");
        if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt must be positive");
        if (n_samples() < 2) bad("duration must span at least two samples");
        if (!(rise_time >= 0.0) || !(plateau_time >= 0.0) || !(decay_rate >= 0.0))
            bad("envelope times and decay rate must be non-negative");
        if (!(omega_g > 0.0)) bad("omega_g must be positive");
        if (!(zeta_g > 0.0 && zeta_g <= 1.0)) bad("zeta_g must lie in (0, 1]");
        if (!(intensity > 0.0) || !std::isfinite(intensity)) bad("intensity must be positive");
    }
};

struct SeismicRecord {
    TimeSeries series; // ground acceleration, m/s^2
    std::string id;
    std::uint64_t seed = 0;
    GenerationConfig meta;
};

inline double kanai_tajimi_psd(double omega, double omega_g, double zeta_g)
{
    const double r2 = (omega / omega_g) * (omega / omega_g);
    const double z4 = 4.0 * zeta_g * zeta_g * r2;
    return (1.0 + z4) / ((1.0 - r2) * (1.0 - r2) + z4);
}

inline double envelope_value(const GenerationConfig& c, double t)
{
    if (t < c.rise_time) return (t / c.rise_time) * (t / c.rise_time);
    const double t2 = c.rise_time + c.plateau_time;
    if (t < t2) return 1.0;
    return std::exp(-c.decay_rate * (t - t2));
}

inline std::vector<double> envelope(const GenerationConfig& c)
{
    std::vector<double> e(c.n_samples());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = envelope_value(c, c.dt * static_cast<double>(i));
    return e;
}

inline std::string record_id(std::uint64_t seed)
{
    std::string s = std::to_string(seed);
    if (s.size() < 6) s.insert(0, 6 - s.size(), '0');
    return "rec-" + s;
}

// Unit-RMS Kanai-Tajimi filtered Gaussian noise, deterministic in the seed.
inline std::vector<double> filtered_noise(const GenerationConfig& c)
{
    const std::size_t n = c.n_samples();
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(n);
    for (auto& v : w) v = normal(rng);

    Spectrum s = dft(std::span<const double>(w), 1.0 / c.dt);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t kk = std::min(k, n - k);
        const double omega = 2.0 * std::numbers::pi * static_cast<double>(kk) / (static_cast<double>(n) * c.dt);
        s.bins[k] *= std::sqrt(kanai_tajimi_psd(omega, c.omega_g, c.zeta_g));
    }
    std::vector<double> y = idft_real(s);
    double ss = 0.0;
    for (double v : y) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(n));
    if (rms > 0.0)
        for (auto& v : y) v /= rms;
    return y;
}

// Shapes the seed's noise with a caller-supplied envelope.
inline SeismicRecord generate_record(const GenerationConfig& config, std::span<const double> env)
{
    config.validate();
    const std::size_t n = config.n_samples();
    detail::require(env.size() == n, "generate_record: envelope length mismatch");
    const std::vector<double> noise = filtered_noise(config);

    std::vector<double> a(n);
    double sum_a = 0.0, sum_e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = config.intensity * env[i] * noise[i];
        sum_a += a[i];
        sum_e += env[i];
    }
    if (sum_e != 0.0) {
        const double k = sum_a / sum_e;
        for (std::size_t i = 0; i < n; ++i) a[i] -= k * env[i];
    }
    return SeismicRecord{TimeSeries(config.dt, std::move(a)), record_id(config.seed), config.seed, config};
}

inline SeismicRecord generate_record(const GenerationConfig& config)
{
    config.validate();
    const std::vector<double> env = envelope(config);
    return generate_record(config, env);
}

// count records with seeds seed, seed+1, ...
inline std::vector<SeismicRecord> generate_ensemble(const GenerationConfig& config, std::size_t count = 50)
{
    detail::require(count >= 1, "generate_ensemble: count must be >= 1");
    std::vector<SeismicRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        GenerationConfig c = config;
        c.seed = config.seed + i;
        out.push_back(generate_record(c));
    }
    return out;
}

// Two columns (time, acceleration); a non-numeric header row is skipped.
inline SeismicRecord import_record_csv(const std::filesystem::path& path)
{
    const csv::Table t = csv::read(path);
    if (t.rows.empty()) throw InputError(path.string() + ": no samples");
    if (t.rows.front().size() != 2) throw InputError(path.string() + ": expected two columns (time, acceleration)");
    const std::size_t n = t.rows.size();
    if (n < 2) throw InputError(path.string() + ": need at least two samples to infer dt");

    const double dt = (t.rows.back()[0] - t.rows.front()[0]) / static_cast<double>(n - 1);
    if (!(dt > 0.0)) throw InputError(path.string() + ": time column must be strictly increasing");
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double step = t.rows[i][0] - t.rows[i - 1][0];
            if (!(step > 0.0)) throw InputError(path.string() + ": time column must be strictly increasing");
            if (std::abs(step - dt) > 1e-6 * dt)
                throw InputError(path.string() + ": non-uniform time grid at row " + std::to_string(i + 1));
        }
        if (!std::isfinite(t.rows[i][1])) throw InputError(path.string() + ": non-finite acceleration");
        acc[i] = t.rows[i][1];
    }
    SeismicRecord r;
    r.series = TimeSeries(dt, std::move(acc));
    r.id = path.stem().string();
    r.meta.dt = dt;
    r.meta.duration = dt * static_cast<double>(n);
    return r;
}

inline void export_record_csv(const SeismicRecord& record, const std::filesystem::path& path)
{
    csv::Writer w(path, {"time", "acceleration"});
    for (std::size_t i = 0; i < record.series.size(); ++i) w.row({record.series.time(i), record.series[i]});
}

} // namespace msdon
