#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "msdon/deeponet.hpp"

using namespace msdon;

namespace {

constexpr double pi = std::numbers::pi;

DeepONetSpec small_spec(Variant v, std::size_t floors = 1)
{
    DeepONetSpec s;
    s.variant = v;
    s.m = 5;
    s.p = 6;
    s.floors = floors;
    s.branch = {2, 4, Activation::relu, {}};
    s.trunk = {2, 4, Activation::sin, {}};
    if (branch_is_multiscale(v)) s.branch = {2, 3, Activation::sin, {1.0, 2.0, 4.0}};
    if (trunk_is_multiscale(v)) s.trunk.scales = {1.0, 1 + 2 * pi, 1 + 4 * pi};
    return s;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> d(0, 1);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

template <class M, class Tape>
double fd_error(M& model, const Eigen::MatrixXd& u, const Eigen::VectorXd& t, std::mt19937_64& rng)
{
    // Jitter every parameter so no relu pre-activation sits exactly on the
    // kink, where the analytic subgradient is 0 by convention.
    auto theta = flatten(model);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (double& v : theta) v += jitter(rng);
    unflatten(model, theta);
    FloorMatrices w;
    for (std::size_t f = 0; f < predict(model, u, t).size(); ++f)
        w.push_back(random_matrix(u.cols(), t.size(), rng));
    auto value = [&](const M& mm) {
        const auto y = predict(mm, u, t);
        double s = 0.0;
        for (std::size_t f = 0; f < y.size(); ++f) s += (y[f].array() * w[f].array()).sum();
        return s;
    };
    Tape tape;
    predict(model, u, t, &tape);
    M grad = model;
    visit_params(grad, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
    backward(model, tape, w, grad);
    const auto g = flatten(grad);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        unflatten(model, theta);
        const double fp = value(model);
        theta[i] = keep - h;
        unflatten(model, theta);
        const double fm = value(model);
        theta[i] = keep;
        unflatten(model, theta);
        const double fd = (fp - fm) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-3, std::abs(fd) + std::abs(g[i])));
    }
    return worst;
}

// p = 1 model whose branch returns the constant 2 and trunk the constant 3.
DeepONetModel constant_model(double bias)
{
    DeepONetModel m;
    m.variant = Variant::bFCN_tFCN;
    m.m = 2;
    m.p = 1;
    m.floors = 1;
    DenseNet b = DenseNet::zeros({2, 1}, Activation::identity);
    b.layers[0].bias(0) = 2.0;
    DenseNet t = DenseNet::zeros({1, 1}, Activation::identity);
    t.layers[0].bias(0) = 3.0;
    m.branch = b;
    m.trunk = t;
    m.bias = Eigen::VectorXd::Constant(1, bias);
    m.output_scale = Eigen::VectorXd::Ones(1);
    return m;
}

} // namespace

TEST(Variants, NamesRoundTrip)
{
    for (Variant v : all_variants) EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_THROW(parse_variant("bXX"), InvalidArgument);
}

TEST(Variants, SideTypesFollowTheName)
{
    for (Variant v : all_variants) {
        const auto m = build_variant(small_spec(v), 1);
        EXPECT_EQ(is_multiscale(m.branch), branch_is_multiscale(v));
        EXPECT_EQ(is_multiscale(m.trunk), trunk_is_multiscale(v));
        EXPECT_EQ(out_dim(m.branch), 6u);
        EXPECT_EQ(out_dim(m.trunk), 6u);
    }
    const auto a = build_variant(small_spec(Variant::bMS_tFCN), 1);
    const auto b = build_variant(small_spec(Variant::bFCN_tMS), 1);
    EXPECT_NE(is_multiscale(a.branch), is_multiscale(b.branch));
    EXPECT_NE(is_multiscale(a.trunk), is_multiscale(b.trunk));
}

TEST(Variants, ScalesRequiredExactlyOnMultiscaleSides)
{
    auto s = small_spec(Variant::bFCN_tMS);
    s.trunk.scales.clear();
    EXPECT_THROW(build_variant(s, 1), InvalidArgument);
    s = small_spec(Variant::bFCN_tFCN);
    s.trunk.scales = {1.0};
    EXPECT_THROW(build_variant(s, 1), InvalidArgument);
    s = small_spec(Variant::bMS_tMS);
    s.branch.scales.clear();
    EXPECT_THROW(build_variant(s, 1), InvalidArgument);
}

TEST(Variants, ReferenceSizes)
{
    const auto s = reference_structure_spec(Variant::bFCN_tMS, 100);
    // 100 evenly spaced scales spanning [1, 1 + 200 pi]
    EXPECT_EQ(s.trunk.scales.size(), 100u);
    EXPECT_DOUBLE_EQ(s.trunk.scales.front(), 1.0);
    EXPECT_NEAR(s.trunk.scales.back(), 1 + 200 * pi, 1e-9);
    for (std::size_t i = 1; i < 100; ++i) EXPECT_NEAR(s.trunk.scales[i] - s.trunk.scales[i - 1], 200 * pi / 99, 1e-9);
    const auto m = build_variant(s, 1);
    EXPECT_EQ(out_dim(m.trunk), 1000u);
    EXPECT_EQ(std::get<MultiscaleNet>(m.trunk).subnets.size(), 100u);
    EXPECT_EQ(std::get<MultiscaleNet>(m.trunk).subnets[0].layer_sizes(), (std::vector<std::size_t>{1, 10, 10, 10, 10}));
    const auto d = reference_structure_spec(Variant::bFCN_tFCN, 100);
    EXPECT_EQ(d.trunk.width, 1000u);
    EXPECT_EQ(d.branch.width, 500u);
    EXPECT_EQ(reference_structure_spec(Variant::bMS_tFCN, 100).branch.width, 5u);
}

TEST(Eval, DotProductPlusBias)
{
    const std::vector<double> u{0.3, -1.0};
    EXPECT_DOUBLE_EQ(deeponet_eval(constant_model(0.5), u, 0.2)[0], 6.5);
    auto zero = constant_model(-1.25);
    std::get<DenseNet>(zero.branch).layers[0].bias(0) = 0.0;
    EXPECT_DOUBLE_EQ(deeponet_eval(zero, u, 0.7)[0], -1.25);
}

TEST(Eval, SevenFloorsGiveSevenOutputs)
{
    const auto m = build_variant(small_spec(Variant::bFCN_tMS, 7), 2);
    const std::vector<double> u(5, 0.1);
    EXPECT_EQ(deeponet_eval(m, u, 0.5).size(), 7u);
    const auto d = build_variant(small_spec(Variant::bFCN_tFCN, 7), 2);
    EXPECT_EQ(out_dim(d.trunk), 42u);
    EXPECT_THROW(deeponet_eval(m, std::vector<double>(4, 0.0), 0.5), InvalidArgument);
}

TEST(Eval, MultiscaleTrunkGivesEveryFloorEveryScale)
{
    // 3 subnets, p = 6, 2 floors: each subnet emits 4 rows, 2 per floor.
    const auto m = build_variant(small_spec(Variant::bFCN_tMS, 2), 3);
    std::vector<Eigen::Index> all;
    for (std::size_t f = 0; f < 2; ++f) {
        const auto rows = m.floor_rows(f);
        EXPECT_EQ(rows.size(), 6u);
        std::set<Eigen::Index> subnets;
        for (auto r : rows) subnets.insert(r / 4);
        EXPECT_EQ(subnets.size(), 3u);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<Eigen::Index> expect(12);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(all, expect);
}

TEST(Eval, LatentPermutationInvariance)
{
    auto m = build_variant(small_spec(Variant::bFCN_tFCN), 4);
    m.bias(0) = 0.3;
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd u = random_matrix(5, 3, rng);
    Eigen::VectorXd t(4);
    t << 0.0, 0.2, 0.5, 1.0;
    const auto before = predict(m, u, t);
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    Eigen::PermutationMatrix<Eigen::Dynamic> P(6);
    for (int i = 0; i < 6; ++i) P.indices()[i] = perm[static_cast<std::size_t>(i)];
    auto& bl = std::get<DenseNet>(m.branch).layers.back();
    auto& tl = std::get<DenseNet>(m.trunk).layers.back();
    bl.weight = P * bl.weight;
    bl.bias = P * bl.bias;
    tl.weight = P * tl.weight;
    tl.bias = P * tl.bias;
    const auto after = predict(m, u, t);
    EXPECT_LT((before[0] - after[0]).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Eval, NormalizationConstants)
{
    auto m = constant_model(0.5);
    std::get<DenseNet>(m.branch).layers[0].weight << 1.0, 0.0;
    set_normalization(m, {2.0, 0.1, {10.0}});
    // branch = 2 + 2*u0, trunk = 3: y = 10 * ((2 + 2 u0) * 3 + 0.5)
    const std::vector<double> u{0.25, 9.0};
    EXPECT_DOUBLE_EQ(deeponet_eval(m, u, 4.0)[0], 10.0 * (2.5 * 3 + 0.5));
    EXPECT_THROW(set_normalization(m, {1, 1, {1, 1}}), InvalidArgument);
}

TEST(AmplitudeSeparated, TierCombination)
{
    AmplitudeSeparatedModel a;
    a.epsilon = 0.1;
    for (double b : {1.0, 2.0, 5.0}) a.tiers.push_back(constant_model(b)); // outputs 7, 8, 11
    const std::vector<double> u{0, 0};
    EXPECT_NEAR(amplitude_separated_eval(a, u, 0.3)[0], 7 + 0.1 * 8 + 0.01 * 11, 1e-14);
    a.epsilon = 0.0;
    EXPECT_DOUBLE_EQ(amplitude_separated_eval(a, u, 0.3)[0], 7.0);
    a.tiers.resize(1);
    a.epsilon = 0.1;
    EXPECT_EQ(amplitude_separated_eval(a, u, 0.3), deeponet_eval(a.tiers[0], u, 0.3));
}

TEST(AmplitudeSeparated, LinearInEachTierWithCoefficientEpsilonPower)
{
    AmplitudeSeparatedSpec s;
    s.m = 5;
    s.floors = 2;
    s.epsilon = 0.2;
    s.tier_scales = {{1.0, 3.0}, {1.0, 5.0}, {1.0, 9.0}};
    s.features_per_subnet = 2;
    s.trunk = {2, 4, Activation::sin, {}};
    s.branch = {2, 6, Activation::relu, {}};
    auto model = build_amplitude_separated(s, 5);
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd u = random_matrix(5, 2, rng);
    Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0, 1);
    const auto base = predict(model, u, t);
    for (std::size_t i = 0; i < 3; ++i) {
        auto bumped = model;
        bumped.tiers[i].bias(1) += 1.0;
        const auto y = predict(bumped, u, t);
        EXPECT_LT((y[0] - base[0]).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_NEAR((y[1] - base[1]).mean(), std::pow(0.2, static_cast<double>(i)), 1e-12);
    }
}

TEST(AmplitudeSeparated, ReferenceSpec)
{
    const auto s = reference_amplitude_separated_spec(100);
    ASSERT_EQ(s.tier_scales.size(), 3u);
    EXPECT_NEAR(s.tier_scales[0].back(), 1 + 20 * pi, 1e-9);
    EXPECT_NEAR(s.tier_scales[1].back(), 1 + 100 * pi, 1e-9);
    EXPECT_NEAR(s.tier_scales[2].back(), 1 + 200 * pi, 1e-9);
    EXPECT_EQ(s.tier_scales[2].size(), 101u);
    EXPECT_DOUBLE_EQ(s.epsilon, 0.1);
    EXPECT_EQ(s.branch.width, 128u);
    EXPECT_EQ(s.branch.activation, Activation::relu);
    EXPECT_EQ(s.trunk.width, 8u);
}

TEST(Gradient, AllVariantsMatchFiniteDifferences)
{
    std::mt19937_64 rng(12);
    for (Variant v : all_variants)
        for (std::size_t floors : {1u, 2u}) {
            auto m = build_variant(small_spec(v, floors), 20);
            m.bias.setConstant(0.1);
            set_normalization(m, {0.7, 0.5, std::vector<double>(floors, 1.3)});
            const Eigen::MatrixXd u = random_matrix(5, 3, rng);
            const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(4, 0.0, 2.0);
            EXPECT_LT((fd_error<DeepONetModel, DeepONetTape>(m, u, t, rng)), 1e-5) << to_string(v) << " floors " << floors;
        }
}

TEST(Gradient, ThreeTierSeparatedModelMatchesFiniteDifferences)
{
    AmplitudeSeparatedSpec s;
    s.m = 4;
    s.floors = 2;
    s.tier_scales = {{1.0, 2.0}, {1.0, 4.0}, {1.0, 8.0}};
    s.features_per_subnet = 2;
    s.trunk = {2, 3, Activation::sin, {}};
    s.branch = {2, 5, Activation::relu, {}};
    auto model = build_amplitude_separated(s, 3);
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd u = random_matrix(4, 2, rng);
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
    EXPECT_LT((fd_error<AmplitudeSeparatedModel, AmplitudeSeparatedTape>(model, u, t, rng)), 1e-5);
}

TEST(Parameters, Counts)
{
    auto m = constant_model(0.0);
    m.branch = DenseNet::zeros({3, 2}, Activation::sin);
    EXPECT_EQ(count_parameters(m.branch), 8u);
    const auto v = build_variant(small_spec(Variant::bFCN_tMS), 1);
    const auto& ms = std::get<MultiscaleNet>(v.trunk);
    EXPECT_EQ(count_parameters(v.trunk), ms.subnets.size() * count_parameters(ms.subnets[0]));
    EXPECT_EQ(count_parameters(v), count_parameters(v.branch) + count_parameters(v.trunk) + 1);
    EXPECT_EQ(count_parameters(v), flatten(v).size());
}

TEST(Checkpoint, RoundTripBothKinds)
{
    auto m = build_variant(small_spec(Variant::bMS_tMS, 2), 7);
    set_normalization(m, {0.5, 0.25, {2.0, 3.0}});
    m.bias << 0.1, -0.2;
    const auto back = model_from_checkpoint(nlohmann::json::parse(checkpoint_json(m).dump()));
    ASSERT_EQ(back.tiers.size(), 1u);
    EXPECT_EQ(flatten(back.tiers[0]), flatten(m));
    EXPECT_EQ(back.tiers[0].output_scale, m.output_scale);
    EXPECT_EQ(back.tiers[0].variant, m.variant);

    AmplitudeSeparatedSpec s;
    s.m = 5;
    s.tier_scales = {{1.0}, {1.0, 2.0}};
    auto a = build_amplitude_separated(s, 9);
    const auto a2 = model_from_checkpoint(nlohmann::json::parse(checkpoint_json(a).dump()));
    EXPECT_EQ(flatten(a2), flatten(a));
    EXPECT_DOUBLE_EQ(a2.epsilon, a.epsilon);

    EXPECT_THROW(model_from_checkpoint(nlohmann::json{{"format", "other"}}), InputError);
    EXPECT_THROW(model_from_checkpoint(nlohmann::json{{"format", "msdon-checkpoint"}, {"version", 99}}), InputError);
}
