#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "msdon/training.hpp"

using namespace msdon;

namespace {

Eigen::MatrixXd row(std::initializer_list<double> v)
{
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) m(0, i++) = x;
    return m;
}

// Toy operator: u(t) = a sin(2 pi t) + b, response y = a sin(2 pi t - 0.5) + 0.5 b t.
OperatorSample toy_sample(const std::string& id, double a, double b, std::size_t steps = 81)
{
    const double dt = 1.0 / static_cast<double>(steps - 1);
    std::vector<double> u(steps);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(steps), 1);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = dt * static_cast<double>(i);
        u[i] = a * std::sin(2 * std::numbers::pi * t) + b;
        y(static_cast<Eigen::Index>(i), 0) = a * std::sin(2 * std::numbers::pi * t - 0.5) + 0.5 * b * t;
    }
    auto s = make_sample(id, TimeSeries(dt, u), y, 20, 2);
    s.sources = {id};
    return s;
}

std::vector<OperatorSample> toy_set(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.5, 2.0);
    std::vector<OperatorSample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(toy_sample("s" + std::to_string(seed) + "-" + std::to_string(i), d(rng), d(rng) - 1.25));
    return out;
}

DeepONetModel toy_model(std::uint64_t seed, std::span<const OperatorSample> train)
{
    DeepONetSpec s;
    s.variant = Variant::bFCN_tMS;
    s.m = 20;
    s.p = 8;
    s.branch = {2, 16, Activation::relu, {}};
    s.trunk = {2, 8, Activation::sin, {1.0, 4.0}};
    auto m = build_variant(s, seed);
    set_normalization(m, fit_normalization(train));
    return m;
}

} // namespace

TEST(Loss, WorkedExample)
{
    EXPECT_DOUBLE_EQ(weighted_loss(row({0, 0}), row({2, 0}), 1.0), 2.0);
    EXPECT_DOUBLE_EQ(weighted_loss(row({2, 0}), row({2, 0}), 1.0), 0.0);
    // two rows: (1/2)[ (1/1)*0.5*1 + (1/4)*0.5*16 ] = 1.25
    Eigen::MatrixXd p(2, 2), y(2, 2);
    p << 0, 1, 0, 0;
    y << 1, 1, 4, 0;
    EXPECT_DOUBLE_EQ(weighted_loss(p, y, 0.5), 0.25 + 1.0);
    EXPECT_THROW(weighted_loss(row({1, 1}), row({0, 0}), 1.0), InvalidArgument);
    EXPECT_THROW(weighted_loss(row({1}), row({1, 1}), 1.0), InvalidArgument);
}

TEST(Loss, RowHomogeneityOfDegreeOne)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0, 1);
    Eigen::MatrixXd p(3, 10), y(3, 10);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = d(rng), y.data()[i] = d(rng);
    for (double alpha : {0.1, 3.0, 250.0}) {
        Eigen::MatrixXd p2 = p, y2 = y;
        p2.row(1) *= alpha;
        y2.row(1) *= alpha;
        auto row_term = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index r) {
            return weighted_loss(a.row(r), b.row(r), 0.01);
        };
        EXPECT_NEAR(row_term(p2, y2, 1), alpha * row_term(p, y, 1), 1e-12 * alpha);
        const double expect = (row_term(p, y, 0) + alpha * row_term(p, y, 1) + row_term(p, y, 2)) / 3.0;
        EXPECT_NEAR(weighted_loss(p2, y2, 0.01), expect, 1e-12 * alpha);
    }
}

TEST(RelativeL2, Examples)
{
    EXPECT_DOUBLE_EQ(relative_l2(row({1, 2}), row({1, 2})), 0.0);
    EXPECT_DOUBLE_EQ(relative_l2(row({0, 0}), row({3, 4})), 1.0);
    EXPECT_DOUBLE_EQ(relative_l2(row({6, 8}), row({3, 4}), 0.2), 1.0);
    Eigen::MatrixXd p(2, 2), y(2, 2);
    p << 1, 0, 0, 0;
    y << 1, 0, 0, 2;
    EXPECT_DOUBLE_EQ(relative_l2(p, y), 0.5);
    EXPECT_THROW(relative_l2(row({1}), row({0})), InvalidArgument);
}

TEST(BatchLoss, GradientMatchesFiniteDifferences)
{
    auto set = toy_set(3, 2);
    const Batch b = make_batch(set);
    FloorMatrices pred = b.targets;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0, 0.3);
    for (auto& m : pred)
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += d(rng);
    FloorMatrices grad;
    const double l0 = batch_loss(pred, b, &grad);
    EXPECT_GT(l0, 0.0);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < pred[0].size(); i += 7) {
        auto pp = pred, pm = pred;
        pp[0].data()[i] += h;
        pm[0].data()[i] -= h;
        const double fd = (batch_loss(pp, b) - batch_loss(pm, b)) / (2 * h);
        EXPECT_NEAR(grad[0].data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(BatchLoss, MatchesWeightedLossOnSampleFloorRows)
{
    auto set = toy_set(4, 3);
    const Batch b = make_batch(set);
    FloorMatrices pred{b.targets[0] * 0.9};
    const double dt = query_dt(b.times);
    EXPECT_NEAR(batch_loss(pred, b), weighted_loss(pred[0], b.targets[0], dt), 1e-14);
    EXPECT_NEAR(batch_relative_l2(pred, b), 0.1, 1e-12);
}

TEST(Normalization, FitFromTrainingData)
{
    auto set = toy_set(5, 5);
    const auto n = fit_normalization(set);
    double umax = 0.0, ymax = 0.0;
    for (const auto& s : set) {
        for (double v : s.branch_input) umax = std::max(umax, std::abs(v));
        ymax = std::max(ymax, s.targets.cwiseAbs().maxCoeff());
    }
    EXPECT_DOUBLE_EQ(n.input_scale, 1.0 / umax);
    EXPECT_DOUBLE_EQ(n.time_scale, 1.0);
    EXPECT_DOUBLE_EQ(n.output_scale[0], ymax);
}

TEST(Train, ZeroEpochsReturnsInitialModel)
{
    auto set = toy_set(3, 1);
    const auto m = toy_model(1, set);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train<DeepONetModel>(set, {}, m, cfg);
    EXPECT_EQ(flatten(r.model), flatten(m));
    EXPECT_EQ(r.history.epochs(), 0u);
}

TEST(Train, SingleSampleOverfits)
{
    std::vector<OperatorSample> one{toy_sample("only", 1.3, 0.4)};
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batches_per_epoch = 20;
    cfg.batch_size = 1;
    cfg.learning_rate = 3e-3;
    const auto r = train<DeepONetModel>(one, one, toy_model(2, one), cfg);
    EXPECT_LT(r.history.test_rel_l2.back(), 0.05);
    EXPECT_EQ(r.history.train_rel_l2.size(), 150u);
    EXPECT_EQ(r.history.batch_loss.size(), 3000u);
    EXPECT_LT(r.history.batch_loss.back(), r.history.batch_loss.front());
}

TEST(Train, FixedSeedIsBitReproducible)
{
    auto tr = toy_set(6, 7), te = toy_set(2, 8);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batches_per_epoch = 4;
    cfg.batch_size = 3;
    cfg.seed = 17;
    for (bool fly : {false, true}) {
        cfg.on_the_fly_augmentation = fly;
        cfg.subset_size = 2;
        const auto a = train<DeepONetModel>(tr, te, toy_model(3, tr), cfg);
        const auto b = train<DeepONetModel>(tr, te, toy_model(3, tr), cfg);
        EXPECT_EQ(flatten(a.model), flatten(b.model));
        EXPECT_EQ(a.history.batch_loss, b.history.batch_loss);
        EXPECT_EQ(a.history.test_rel_l2, b.history.test_rel_l2);
    }
}

TEST(Train, TrainMetricUsesPreUpdateParameters)
{
    // With one batch per epoch holding the whole set, the epoch's train metric
    // is the relative L2 of the model before that epoch's update.
    auto tr = toy_set(3, 9);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batches_per_epoch = 1;
    cfg.batch_size = 3;
    const auto m0 = toy_model(4, tr);
    const auto r = train<DeepONetModel>(tr, tr, m0, cfg);
    EXPECT_NEAR(r.history.train_rel_l2[0], evaluate(m0, tr), 1e-12);
    EXPECT_NEAR(r.history.train_rel_l2[1], r.history.test_rel_l2[0], 1e-12);
}

TEST(Train, NonFiniteLossAborts)
{
    auto tr = toy_set(2, 10);
    auto m = toy_model(5, tr);
    m.bias(0) = NAN;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batches_per_epoch = 1;
    EXPECT_THROW(train<DeepONetModel>(tr, {}, m, cfg), NumericError);
}

TEST(Train, ConfigValidation)
{
    auto tr = toy_set(2, 11);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 0;
    EXPECT_THROW(train<DeepONetModel>(tr, {}, toy_model(1, tr), cfg), InvalidArgument);
    cfg.batch_size = 2;
    cfg.on_the_fly_augmentation = true;
    cfg.subset_size = 3;
    EXPECT_THROW(train<DeepONetModel>(tr, {}, toy_model(1, tr), cfg), InvalidArgument);
    EXPECT_THROW(train<DeepONetModel>({}, {}, toy_model(1, tr), cfg), InvalidArgument);
}

TEST(History, ThresholdAndCsv)
{
    MetricHistory h;
    h.train_rel_l2 = {0.5, 0.3, 0.2};
    h.test_rel_l2 = {0.6, 0.4, 0.1};
    h.train_mse = {1e-2, 1e-4, 1e-7};
    EXPECT_EQ(epochs_to_threshold(h, 1e-3), 2u);
    EXPECT_EQ(epochs_to_threshold(h, 1e-9), 0u);
    const auto p = std::filesystem::temp_directory_path() / "msdon_test_history.csv";
    write_history_csv(h, p);
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "epoch,train_rel_l2,test_rel_l2,train_mse");
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 3);
}
