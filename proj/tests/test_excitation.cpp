#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "msdon/excitation.hpp"

using namespace msdon;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("msdon_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

GenerationConfig small_config()
{
    GenerationConfig g;
    g.duration = 10.0;
    g.dt = 0.01;
    g.rise_time = 1.0;
    g.plateau_time = 3.0;
    g.decay_rate = 1.0;
    return g;
}

} // namespace

TEST(Generator, DefaultsMatchDocumentedValues)
{
    const GenerationConfig g;
    EXPECT_DOUBLE_EQ(g.duration, 40.0);
    EXPECT_DOUBLE_EQ(g.dt, 0.005);
    EXPECT_DOUBLE_EQ(g.omega_g, 2 * std::numbers::pi * 2.5);
    EXPECT_DOUBLE_EQ(g.zeta_g, 0.6);
    EXPECT_EQ(g.n_samples(), 8000u);
}

TEST(Generator, DeterministicInSeed)
{
    auto g = small_config();
    g.seed = 9;
    const auto a = generate_record(g), b = generate_record(g);
    EXPECT_EQ(a.series.values, b.series.values);
    EXPECT_EQ(a.id, "rec-000009");
    g.seed = 10;
    EXPECT_NE(generate_record(g).series.values, a.series.values);
}

TEST(Generator, IntensityScalesPointwise)
{
    auto g = small_config();
    const auto a = generate_record(g);
    g.intensity = 3.0;
    const auto b = generate_record(g);
    for (std::size_t i = 0; i < a.series.size(); ++i) EXPECT_NEAR(b.series[i], 3.0 * a.series[i], 1e-12);
}

TEST(Generator, ZeroEnvelopeGivesZeroRecord)
{
    const auto g = small_config();
    const std::vector<double> env(g.n_samples(), 0.0);
    const auto r = generate_record(g, env);
    for (double v : r.series.values) EXPECT_EQ(v, 0.0);
}

TEST(Generator, ZeroMeanAndQuietEnds)
{
    auto g = small_config();
    for (std::uint64_t s = 0; s < 5; ++s) {
        g.seed = s;
        const auto r = generate_record(g);
        double sum = 0.0;
        for (double v : r.series.values) sum += v;
        EXPECT_NEAR(sum / static_cast<double>(r.series.size()), 0.0, 1e-12);
        const double peak = max_abs(r.series.values);
        EXPECT_LT(std::abs(r.series.values.front()), 1e-3 * peak);
        EXPECT_LT(std::abs(r.series.values.back()), 1e-3 * peak);
    }
}

TEST(Generator, SpectrumPeaksNearGroundFrequency)
{
    // Averaged periodogram over 20 seeds; the Kanai-Tajimi peak for
    // zeta_g = 0.3 sits slightly below omega_g.
    auto g = small_config();
    g.duration = 40.0;
    g.plateau_time = 30.0;
    g.zeta_g = 0.3;
    const std::size_t n = g.n_samples();
    std::vector<double> avg(n / 2, 0.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        g.seed = 100 + s;
        const auto r = generate_record(g);
        const auto a = amplitude_spectrum(r.series.values);
        for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += a[k] * a[k];
    }
    // light smoothing of the periodogram
    std::size_t kmax = 1;
    double best = 0.0;
    for (std::size_t k = 5; k + 5 < avg.size(); ++k) {
        double v = 0.0;
        for (std::size_t j = k - 5; j <= k + 5; ++j) v += avg[j];
        if (v > best) best = v, kmax = k;
    }
    const double w = 2 * std::numbers::pi * static_cast<double>(kmax) / (static_cast<double>(n) * g.dt);
    EXPECT_NEAR(w / g.omega_g, 1.0, 0.2);
}

TEST(Generator, RejectsInvalidConfig)
{
    auto g = small_config();
    g.zeta_g = 0.0;
    EXPECT_THROW(generate_record(g), InvalidArgument);
    g = small_config();
    g.dt = -1;
    EXPECT_THROW(generate_record(g), InvalidArgument);
    g = small_config();
    g.intensity = 0;
    EXPECT_THROW(generate_record(g), InvalidArgument);
}

TEST(Ensemble, SeedsAndDistinctness)
{
    auto g = small_config();
    g.seed = 40;
    const auto e = generate_ensemble(g, 5);
    ASSERT_EQ(e.size(), 5u);
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(e[i].seed, 40 + i);
    EXPECT_EQ(generate_ensemble(g, 1).front().series.values, generate_record(g).series.values);
    g.seed = 100;
    const auto f = generate_ensemble(g, 5);
    for (const auto& a : e)
        for (const auto& b : f) EXPECT_NE(a.series.values, b.series.values);
    EXPECT_EQ(generate_ensemble(GenerationConfig{}, 50).size(), 50u);
}

TEST(RecordCsv, ImportThreeRows)
{
    const auto dir = temp_dir("import");
    std::ofstream(dir / "quake.csv") << "0,0\n0.01,0.1\n0.02,-0.1\n";
    const auto r = import_record_csv(dir / "quake.csv");
    EXPECT_DOUBLE_EQ(r.series.dt, 0.01);
    EXPECT_EQ(r.series.values, (std::vector<double>{0, 0.1, -0.1}));
    EXPECT_EQ(r.id, "quake");
}

TEST(RecordCsv, HeaderSkippedAndBadGridsRejected)
{
    const auto dir = temp_dir("import2");
    std::ofstream(dir / "h.csv") << "time,acceleration\n0,1\n0.5,2\n";
    EXPECT_EQ(import_record_csv(dir / "h.csv").series.size(), 2u);
    std::ofstream(dir / "bad.csv") << "0,0\n0.01,1\n0.03,2\n";
    EXPECT_THROW(import_record_csv(dir / "bad.csv"), InputError);
    std::ofstream(dir / "empty.csv") << "";
    EXPECT_THROW(import_record_csv(dir / "empty.csv"), InputError);
    EXPECT_THROW(import_record_csv(dir / "missing.csv"), InputError);
    std::ofstream(dir / "junk.csv") << "0,0\n0.1,abc\n";
    EXPECT_THROW(import_record_csv(dir / "junk.csv"), InputError);
}

TEST(RecordCsv, ExportRoundTripIsExact)
{
    const auto dir = temp_dir("export");
    auto g = small_config();
    g.seed = 3;
    const auto r = generate_record(g);
    export_record_csv(r, dir / "r.csv");
    const auto back = import_record_csv(dir / "r.csv");
    EXPECT_EQ(back.series.values, r.series.values);
    EXPECT_NEAR(back.series.dt, r.series.dt, 1e-15);
}
