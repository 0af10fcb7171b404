#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "msdon/dataset.hpp"

using namespace msdon;
namespace fs = std::filesystem;

namespace {

std::vector<SeismicRecord> small_records(std::size_t n, std::uint64_t seed = 0)
{
    GenerationConfig g;
    g.duration = 4.0;
    g.dt = 0.02;
    g.rise_time = 0.5;
    g.plateau_time = 1.5;
    g.decay_rate = 2.0;
    g.omega_g = 2 * std::numbers::pi;
    g.seed = seed;
    return generate_ensemble(g, n);
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST(Sensors, EquispacedWithEndpoints)
{
    std::vector<double> v(101);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3.0 * static_cast<double>(i) / 100.0;
    const TimeSeries s(0.01, v);
    const auto u = sample_sensors(s, 3);
    EXPECT_DOUBLE_EQ(u[0], 0.0);
    EXPECT_DOUBLE_EQ(u[1], 1.5);
    EXPECT_DOUBLE_EQ(u[2], 3.0);
    EXPECT_EQ(sample_sensors(s, 101), v);
    EXPECT_EQ(sample_sensors(TimeSeries(0.1, std::vector<double>(20, 2.5)), 7), std::vector<double>(7, 2.5));
    EXPECT_THROW(sample_sensors(s, 102), InvalidArgument);
    EXPECT_THROW(sample_sensors(s, 1), InvalidArgument);
}

TEST(Sensors, InterpolationIsExactForLinearSignals)
{
    std::vector<double> v(37);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 + 0.5 * static_cast<double>(i);
    const TimeSeries s(0.25, v);
    const auto u = sample_sensors(s, 10);
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double t = s.duration() * static_cast<double>(j) / 9.0;
        EXPECT_NEAR(u[j], 2.0 + 0.5 * t / 0.25, 1e-12);
    }
}

TEST(Weights, SimplexAndSubsets)
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const std::size_t k = 1 + static_cast<std::size_t>(i) % 6;
        const auto w = draw_weights(k, i % 2 == 1, rng);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
        if (i % 2 == 0)
            for (double x : w) EXPECT_GE(x, 0.0);
        const auto idx = draw_subset(10, k, rng);
        EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), k);
    }
    EXPECT_EQ(draw_weights(1, false, rng), std::vector<double>{1.0});
}

TEST(Augmentation, SubsetOfOneReproducesBasePair)
{
    const auto model = default_building(3);
    std::vector<ExcitationResponse> base;
    for (const auto& r : small_records(3)) base.push_back(solve_pair(r, model));
    AugmentationConfig cfg;
    cfg.subset_size = 1;
    cfg.count = 5;
    for (const auto& a : augment_superposition(base, cfg)) {
        ASSERT_EQ(a.sources.size(), 1u);
        EXPECT_EQ(a.weights, std::vector<double>{1.0});
        const auto& b = *std::find_if(base.begin(), base.end(), [&](const auto& p) { return p.id == a.sources[0]; });
        EXPECT_EQ(a.excitation.values, b.excitation.values);
        EXPECT_EQ(a.response, b.response);
    }
}

TEST(Augmentation, ResolvingTheMixtureReproducesTheMixedResponse)
{
    const auto model = default_building(4);
    const auto recs = small_records(2);
    std::vector<ExcitationResponse> base{solve_pair(recs[0], model), solve_pair(recs[1], model)};
    const auto mixed = combine_pairs(base, {0, 1}, {0.3, 0.7});
    const auto resolved = seismic_response(model, mixed.excitation).displacements;
    EXPECT_LT(rel(mixed.response, resolved), 1e-10);
    const Eigen::MatrixXd manual = 0.3 * base[0].response + 0.7 * base[1].response;
    EXPECT_LT(rel(mixed.response, manual), 1e-15);
}

TEST(Augmentation, EveryEmittedPairSatisfiesTheEquationOfMotion)
{
    const auto model = default_building(3);
    std::vector<ExcitationResponse> base;
    for (const auto& r : small_records(6)) base.push_back(solve_pair(r, model));
    AugmentationConfig cfg{3, 20, true, 4};
    for (const auto& a : augment_superposition(base, cfg)) {
        EXPECT_NEAR(std::accumulate(a.weights.begin(), a.weights.end(), 0.0), 1.0, 1e-12);
        EXPECT_LT(rel(a.response, seismic_response(model, a.excitation).displacements), 1e-10);
    }
}

TEST(Augmentation, Errors)
{
    std::vector<ExcitationResponse> empty;
    EXPECT_THROW(augment_superposition(empty, {}), InvalidArgument);
    const auto model = default_building(2);
    std::vector<ExcitationResponse> base{solve_pair(small_records(1).front(), model)};
    AugmentationConfig cfg;
    cfg.subset_size = 2;
    cfg.count = 1;
    EXPECT_THROW(augment_superposition(base, cfg), InvalidArgument);
}

TEST(BuildDataset, SplitAndAugmentationContract)
{
    const auto model = default_building(3);
    DatasetConfig cfg;
    cfg.m = 50;
    cfg.train_fraction = 0.8;
    cfg.augmentation = {4, 100, false, 7};
    const auto ds = build_dataset(small_records(10), model, {}, cfg);
    EXPECT_EQ(ds.train_base().size(), 8u);
    EXPECT_EQ(ds.train.size(), 108u);
    EXPECT_EQ(ds.test.size(), 2u);
    std::set<std::string> test_ids;
    for (const auto& s : ds.test) {
        EXPECT_FALSE(s.augmented);
        test_ids.insert(s.id);
    }
    for (const auto& s : ds.train)
        for (const auto& src : s.sources) EXPECT_EQ(test_ids.count(src), 0u);
    for (const auto& s : ds.train) {
        EXPECT_EQ(s.branch_input.size(), 50u);
        EXPECT_GT(s.max_abs_target[0], 0.0);
        EXPECT_DOUBLE_EQ(s.max_abs_target[0], s.targets.cwiseAbs().maxCoeff());
        EXPECT_LE(s.query_times.back(), s.excitation.duration() + 1e-12);
    }
}

TEST(BuildDataset, TargetsAgreeWithResolvedExcitation)
{
    const auto model = default_building(3);
    DatasetConfig cfg;
    cfg.m = 20;
    cfg.floors = {1, 3};
    cfg.augmentation = {3, 10, false, 1};
    const auto ds = build_dataset(small_records(5), model, {}, cfg);
    for (const auto& s : ds.train) {
        const auto r = seismic_response(model, s.excitation).displacements;
        Eigen::MatrixXd sel(r.cols(), 2);
        sel.col(0) = r.row(0).transpose();
        sel.col(1) = r.row(2).transpose();
        EXPECT_LT(rel(s.targets, sel), 1e-10);
    }
}

TEST(BuildDataset, Errors)
{
    const auto model = default_building(2);
    DatasetConfig cfg;
    cfg.m = 10;
    EXPECT_THROW(build_dataset({}, model, {}, cfg), InvalidArgument);
    cfg.train_fraction = 0.01;
    EXPECT_THROW(build_dataset(small_records(3), model, {}, cfg), InvalidArgument);
    cfg.train_fraction = 0.8;
    cfg.floors = {3};
    EXPECT_THROW(build_dataset(small_records(3), model, {}, cfg), InvalidArgument);

    auto recs = small_records(2);
    recs[1].series.values.assign(recs[1].series.size(), 0.0);
    cfg.floors = {};
    cfg.train_fraction = 0.5;
    EXPECT_THROW(build_dataset(recs, model, {}, cfg), InvalidArgument);
}

TEST(BuildDataset, CombineSamplesEqualsSampleOfMixedPair)
{
    const auto model = default_building(3);
    const auto recs = small_records(3);
    std::vector<ExcitationResponse> pairs;
    std::vector<OperatorSample> samples;
    for (const auto& r : recs) {
        pairs.push_back(solve_pair(r, model));
        samples.push_back(make_sample(pairs.back(), {3}, 30, 2));
    }
    const std::vector<std::size_t> idx{2, 0};
    const std::vector<double> w{0.25, 0.75};
    const auto a = combine_samples(samples, idx, w);
    const auto b = make_sample(combine_pairs(pairs, idx, w), {3}, 30, 2);
    for (std::size_t j = 0; j < a.branch_input.size(); ++j) EXPECT_NEAR(a.branch_input[j], b.branch_input[j], 1e-12);
    EXPECT_LT(rel(a.targets, b.targets), 1e-14);
}

TEST(DatasetIo, SaveLoadRoundTrip)
{
    const auto dir = fs::temp_directory_path() / "msdon_test_dataset";
    fs::remove_all(dir);
    const auto model = default_building(3);
    DatasetConfig cfg;
    cfg.m = 25;
    cfg.floors = {2, 3};
    cfg.query_stride = 2;
    cfg.augmentation = {2, 3, false, 5};
    const auto ds = build_dataset(small_records(5), model, {}, cfg);
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    ASSERT_EQ(back.train.size(), ds.train.size());
    ASSERT_EQ(back.test.size(), ds.test.size());
    EXPECT_EQ(back.floors, ds.floors);
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        EXPECT_EQ(back.train[i].id, ds.train[i].id);
        EXPECT_EQ(back.train[i].augmented, ds.train[i].augmented);
        EXPECT_EQ(back.train[i].branch_input, ds.train[i].branch_input);
        EXPECT_EQ(back.train[i].targets, ds.train[i].targets);
    }
}
