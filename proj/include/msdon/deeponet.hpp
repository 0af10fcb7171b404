#pragma once

// DeepONet assembly.
//
// For floor f the prediction is
//     y_f(u, t) = s_f * ( sum_k branch(a * u)_k * trunk(c * t)_{f,k} + bias_f )
// where a, c and s_f are fixed normalization constants fitted to the
// training data and everything else is trainable. The amplitude-separated
// model sums tiers:  y = sum_i eps^i y_i.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msdon/error.hpp"
#include "msdon/neural.hpp"

namespace msdon {

enum class Variant { bMS_tFCN, bFCN_tMS, bMS_tMS, bFCN_tFCN };

inline constexpr Variant all_variants[] = {Variant::bMS_tFCN, Variant::bFCN_tMS, Variant::bMS_tMS, Variant::bFCN_tFCN};

inline std::string to_string(Variant v)
{
    switch (v) {
    case Variant::bMS_tFCN: return "bMS-tFCN";
    case Variant::bFCN_tMS: return "bFCN-tMS";
    case Variant::bMS_tMS: return "bMS-tMS";
    case Variant::bFCN_tFCN: return "bFCN-tFCN";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s)
{
    for (Variant v : all_variants)
        if (to_string(v) == s) return v;
    throw InvalidArgument("unknown DeepONet variant '" + s + "'");
}

inline bool branch_is_multiscale(Variant v) { return v == Variant::bMS_tFCN || v == Variant::bMS_tMS; }
inline bool trunk_is_multiscale(Variant v) { return v == Variant::bFCN_tMS || v == Variant::bMS_tMS; }

// {1, 1 + d, ..., cap} with count evenly spaced entries; cap = 1 + 2 pi K and
// count = K + 1 gives the {1, 1 + 2pi, ..., 1 + 2K pi} family.
inline std::vector<double> offset_scales(double cap, std::size_t count)
{
    detail::require(count >= 1 && cap >= 1.0, "offset_scales: need count >= 1 and cap >= 1");
    if (count == 1) return {1.0};
    std::vector<double> s(count);
    for (std::size_t i = 0; i < count; ++i)
        s[i] = 1.0 + (cap - 1.0) * static_cast<double>(i) / static_cast<double>(count - 1);
    return s;
}

struct DeepONetModel {
    Variant variant = Variant::bFCN_tMS;
    std::size_t m = 1;      // sensors
    std::size_t p = 1;      // latent features per floor
    std::size_t floors = 1; // outputs
    Net branch;             // m -> p
    Net trunk;              // 1 -> p * floors
    Eigen::VectorXd bias;   // floors, trainable

    double input_scale = 1.0;
    double time_scale = 1.0;
    Eigen::VectorXd output_scale; // floors

    // Trunk rows feeding floor f, feature order k = 0..p-1. A multiscale trunk
    // hands every floor a block of each subnet's outputs so all floors see
    // every scale.
    std::vector<Eigen::Index> floor_rows(std::size_t f) const
    {
        std::vector<Eigen::Index> rows(p);
        if (const auto* ms = std::get_if<MultiscaleNet>(&trunk)) {
            const std::size_t per_subnet = (p * floors) / ms->subnets.size();
            const std::size_t k = per_subnet / floors;
            for (std::size_t r = 0; r < p; ++r) {
                const std::size_t j = r / k, q = r % k;
                rows[r] = static_cast<Eigen::Index>(j * per_subnet + f * k + q);
            }
        } else {
            for (std::size_t r = 0; r < p; ++r) rows[r] = static_cast<Eigen::Index>(f * p + r);
        }
        return rows;
    }
};

struct AmplitudeSeparatedModel {
    double epsilon = 0.1;
    std::vector<DeepONetModel> tiers; // tier i is weighted by epsilon^i

    std::size_t m() const { return tiers.front().m; }
    std::size_t floors() const { return tiers.front().floors; }
};

template <class D, class F>
    requires std::is_same_v<std::remove_const_t<D>, DeepONetModel>
void visit_params(D& model, F&& f)
{
    visit_params(model.branch, f);
    visit_params(model.trunk, f);
    f(std::span(model.bias.data(), static_cast<std::size_t>(model.bias.size())));
}

template <class A, class F>
    requires std::is_same_v<std::remove_const_t<A>, AmplitudeSeparatedModel>
void visit_params(A& model, F&& f)
{
    for (auto& t : model.tiers) visit_params(t, f);
}

// ---------------------------------------------------------------------------
// Construction

struct SideConfig {
    std::size_t hidden_layers = 3;
    std::size_t width = 8;
    Activation activation = Activation::sin;
    std::vector<double> scales; // required exactly when this side is multiscale
};

struct DeepONetSpec {
    Variant variant = Variant::bFCN_tMS;
    std::size_t m = 100;
    std::size_t p = 40;
    std::size_t floors = 1;
    SideConfig branch;
    SideConfig trunk;
};

inline DeepONetModel build_variant(const DeepONetSpec& spec, std::mt19937_64& rng)
{
    detail::require(spec.m >= 1 && spec.p >= 1 && spec.floors >= 1, "build_variant: m, p and floors must be >= 1");
    const bool bms = branch_is_multiscale(spec.variant), tms = trunk_is_multiscale(spec.variant);
    if (bms && spec.branch.scales.empty())
        throw InvalidArgument("build_variant: " + to_string(spec.variant) + " needs branch scales");
    if (!bms && !spec.branch.scales.empty())
        throw InvalidArgument("build_variant: " + to_string(spec.variant) + " has a dense branch; scales not allowed");
    if (tms && spec.trunk.scales.empty())
        throw InvalidArgument("build_variant: " + to_string(spec.variant) + " needs trunk scales");
    if (!tms && !spec.trunk.scales.empty())
        throw InvalidArgument("build_variant: " + to_string(spec.variant) + " has a dense trunk; scales not allowed");
    if (tms) {
        const std::size_t s = spec.trunk.scales.size();
        if ((spec.p * spec.floors) % s != 0 || ((spec.p * spec.floors) / s) % spec.floors != 0)
            throw InvalidArgument("build_variant: p must be a multiple of the trunk subnet count");
    }

    DeepONetModel model;
    model.variant = spec.variant;
    model.m = spec.m;
    model.p = spec.p;
    model.floors = spec.floors;
    model.branch = init_params(NetSpec{bms, spec.m, spec.p, spec.branch.hidden_layers, spec.branch.width,
                                       spec.branch.activation, spec.branch.scales},
                               rng);
    model.trunk = init_params(NetSpec{tms, 1, spec.p * spec.floors, spec.trunk.hidden_layers, spec.trunk.width,
                                      spec.trunk.activation, spec.trunk.scales},
                              rng);
    model.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.floors));
    model.output_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.floors));
    return model;
}

inline DeepONetModel build_variant(const DeepONetSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return build_variant(spec, rng);
}

// Reference sizes of the structure comparison: 100-subnet multiscale sides
// (10 neurons trunk, 5 neurons branch), dense sides with the same total
// hidden width (1000 trunk, 500 branch), sin activations, 1000 features.
inline DeepONetSpec reference_structure_spec(Variant v, std::size_t m)
{
    const std::vector<double> scales = offset_scales(1.0 + 200.0 * std::numbers::pi, 100);
    DeepONetSpec s;
    s.variant = v;
    s.m = m;
    s.p = 1000;
    s.branch = branch_is_multiscale(v) ? SideConfig{3, 5, Activation::sin, scales} : SideConfig{3, 500, Activation::sin, {}};
    s.trunk = trunk_is_multiscale(v) ? SideConfig{3, 10, Activation::sin, scales} : SideConfig{3, 1000, Activation::sin, {}};
    return s;
}

struct AmplitudeSeparatedSpec {
    std::size_t m = 100;
    std::size_t floors = 1;
    double epsilon = 0.1;
    std::vector<std::vector<double>> tier_scales; // trunk scales of tier 0, 1, ...
    std::size_t features_per_subnet = 4;          // per floor
    SideConfig trunk{3, 8, Activation::sin, {}};  // scales taken from tier_scales
    SideConfig branch{3, 128, Activation::relu, {}};
};

// Three tiers with trunk scale caps 1 + 20pi, 1 + 100pi, 1 + 200pi (step 2pi),
// 4-layer x 8-neuron subnets and a 4-layer x 128 relu branch.
inline AmplitudeSeparatedSpec reference_amplitude_separated_spec(std::size_t m, std::size_t floors = 1)
{
    AmplitudeSeparatedSpec s;
    s.m = m;
    s.floors = floors;
    for (int k : {10, 50, 100})
        s.tier_scales.push_back(offset_scales(1.0 + 2.0 * k * std::numbers::pi, static_cast<std::size_t>(k) + 1));
    s.features_per_subnet = 8;
    return s;
}

inline AmplitudeSeparatedModel build_amplitude_separated(const AmplitudeSeparatedSpec& spec, std::mt19937_64& rng)
{
    detail::require(!spec.tier_scales.empty(), "build_amplitude_separated: need at least one tier");
    detail::require(spec.epsilon >= 0.0 && spec.epsilon < 1.0, "build_amplitude_separated: epsilon must be in [0, 1)");
    AmplitudeSeparatedModel model;
    model.epsilon = spec.epsilon;
    for (const auto& scales : spec.tier_scales) {
        DeepONetSpec t;
        t.variant = Variant::bFCN_tMS;
        t.m = spec.m;
        t.floors = spec.floors;
        t.p = scales.size() * spec.features_per_subnet;
        t.branch = spec.branch;
        t.branch.scales.clear();
        t.trunk = spec.trunk;
        t.trunk.scales = scales;
        model.tiers.push_back(build_variant(t, rng));
    }
    return model;
}

inline AmplitudeSeparatedModel build_amplitude_separated(const AmplitudeSeparatedSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return build_amplitude_separated(spec, rng);
}

inline std::size_t count_parameters(const DeepONetModel& model)
{
    return count_parameters(model.branch) + count_parameters(model.trunk) + static_cast<std::size_t>(model.bias.size());
}

inline std::size_t count_parameters(const AmplitudeSeparatedModel& model)
{
    std::size_t n = 0;
    for (const auto& t : model.tiers) n += count_parameters(t);
    return n;
}

// ---------------------------------------------------------------------------
// Normalization

struct Normalization {
    double input_scale = 1.0;
    double time_scale = 1.0;
    std::vector<double> output_scale;
};

inline void set_normalization(DeepONetModel& model, const Normalization& n)
{
    detail::require(n.output_scale.size() == model.floors, "set_normalization: output scale per floor required");
    model.input_scale = n.input_scale;
    model.time_scale = n.time_scale;
    model.output_scale =
        Eigen::Map<const Eigen::VectorXd>(n.output_scale.data(), static_cast<Eigen::Index>(n.output_scale.size()));
}

inline void set_normalization(AmplitudeSeparatedModel& model, const Normalization& n)
{
    for (auto& t : model.tiers) set_normalization(t, n);
}

// ---------------------------------------------------------------------------
// Batched evaluation. inputs is (m x N) sensor values, times has T entries;
// the result holds one (N x T) matrix per floor.

struct DeepONetTape {
    NetTape branch;
    NetTape trunk;
    Eigen::MatrixXd branch_out; // p x N
    Eigen::MatrixXd trunk_out;  // p*floors x T
};

using FloorMatrices = std::vector<Eigen::MatrixXd>;

inline FloorMatrices predict(const DeepONetModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& times,
                             DeepONetTape* tape = nullptr)
{
    if (static_cast<std::size_t>(inputs.rows()) != model.m)
        throw InvalidArgument("deeponet: branch input arity " + std::to_string(inputs.rows()) + " != " +
                              std::to_string(model.m));
    DeepONetTape local;
    DeepONetTape& tp = tape ? *tape : local;
    tp.branch_out = forward(model.branch, model.input_scale * inputs, tape ? &tp.branch : nullptr);
    const Eigen::MatrixXd t = (model.time_scale * times).transpose();
    tp.trunk_out = forward(model.trunk, t, tape ? &tp.trunk : nullptr);

    FloorMatrices out(model.floors);
    for (std::size_t f = 0; f < model.floors; ++f) {
        const auto fi = static_cast<Eigen::Index>(f);
        const Eigen::MatrixXd phi = tp.trunk_out(model.floor_rows(f), Eigen::all);
        out[f] = tp.branch_out.transpose() * phi;
        out[f].array() += model.bias(fi);
        out[f] *= model.output_scale(fi);
    }
    return out;
}

inline void backward(const DeepONetModel& model, const DeepONetTape& tape, const FloorMatrices& d_out,
                     DeepONetModel& grad)
{
    Eigen::MatrixXd d_branch = Eigen::MatrixXd::Zero(tape.branch_out.rows(), tape.branch_out.cols());
    Eigen::MatrixXd d_trunk = Eigen::MatrixXd::Zero(tape.trunk_out.rows(), tape.trunk_out.cols());
    for (std::size_t f = 0; f < model.floors; ++f) {
        const auto fi = static_cast<Eigen::Index>(f);
        const Eigen::MatrixXd g = model.output_scale(fi) * d_out[f]; // N x T
        const auto rows = model.floor_rows(f);
        const Eigen::MatrixXd phi = tape.trunk_out(rows, Eigen::all);
        d_branch.noalias() += phi * g.transpose();
        d_trunk(rows, Eigen::all) += tape.branch_out * g;
        grad.bias(fi) += g.sum();
    }
    backward(model.branch, tape.branch, d_branch, grad.branch);
    backward(model.trunk, tape.trunk, d_trunk, grad.trunk);
}

struct AmplitudeSeparatedTape {
    std::vector<DeepONetTape> tiers;
};

inline FloorMatrices predict(const AmplitudeSeparatedModel& model, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& times, AmplitudeSeparatedTape* tape = nullptr)
{
    if (tape) tape->tiers.assign(model.tiers.size(), DeepONetTape{});
    FloorMatrices out;
    double w = 1.0;
    for (std::size_t i = 0; i < model.tiers.size(); ++i) {
        FloorMatrices y = predict(model.tiers[i], inputs, times, tape ? &tape->tiers[i] : nullptr);
        if (i == 0) {
            out = std::move(y);
        } else {
            for (std::size_t f = 0; f < out.size(); ++f) out[f] += w * y[f];
        }
        w *= model.epsilon;
    }
    return out;
}

inline void backward(const AmplitudeSeparatedModel& model, const AmplitudeSeparatedTape& tape, const FloorMatrices& d_out,
                     AmplitudeSeparatedModel& grad)
{
    double w = 1.0;
    for (std::size_t i = 0; i < model.tiers.size(); ++i) {
        FloorMatrices d = d_out;
        for (auto& m : d) m *= w;
        backward(model.tiers[i], tape.tiers[i], d, grad.tiers[i]);
        w *= model.epsilon;
    }
}

// Single (u, t) query, one value per floor.
inline std::vector<double> deeponet_eval(const DeepONetModel& model, std::span<const double> u, double t)
{
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::VectorXd times(1);
    times(0) = t;
    const FloorMatrices y = predict(model, in, times);
    std::vector<double> out;
    for (const auto& m : y) out.push_back(m(0, 0));
    return out;
}

inline std::vector<double> amplitude_separated_eval(const AmplitudeSeparatedModel& model, std::span<const double> u,
                                                    double t)
{
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::VectorXd times(1);
    times(0) = t;
    const FloorMatrices y = predict(model, in, times);
    std::vector<double> out;
    for (const auto& m : y) out.push_back(m(0, 0));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int checkpoint_version = 1;

inline nlohmann::json to_json(const DeepONetModel& m)
{
    return {{"variant", to_string(m.variant)},
            {"m", m.m},
            {"p", m.p},
            {"floors", m.floors},
            {"input_scale", m.input_scale},
            {"time_scale", m.time_scale},
            {"output_scale", std::vector<double>(m.output_scale.data(), m.output_scale.data() + m.output_scale.size())},
            {"bias", std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size())},
            {"branch", to_json(m.branch)},
            {"trunk", to_json(m.trunk)}};
}

inline DeepONetModel deeponet_from_json(const nlohmann::json& j)
{
    DeepONetModel m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.m = j.at("m").get<std::size_t>();
    m.p = j.at("p").get<std::size_t>();
    m.floors = j.at("floors").get<std::size_t>();
    m.input_scale = j.at("input_scale").get<double>();
    m.time_scale = j.at("time_scale").get<double>();
    const auto os = j.at("output_scale").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (os.size() != m.floors || b.size() != m.floors) throw InputError("checkpoint: per-floor vector size mismatch");
    m.output_scale = Eigen::Map<const Eigen::VectorXd>(os.data(), static_cast<Eigen::Index>(os.size()));
    m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    m.branch = net_from_json(j.at("branch"));
    m.trunk = net_from_json(j.at("trunk"));
    if (in_dim(m.branch) != m.m || out_dim(m.branch) != m.p || out_dim(m.trunk) != m.p * m.floors)
        throw InputError("checkpoint: network arities inconsistent with m, p, floors");
    return m;
}

inline nlohmann::json checkpoint_json(const DeepONetModel& m)
{
    return {{"format", "msdon-checkpoint"}, {"version", checkpoint_version}, {"kind", "deeponet"}, {"model", to_json(m)}};
}

inline nlohmann::json checkpoint_json(const AmplitudeSeparatedModel& m)
{
    nlohmann::json tiers = nlohmann::json::array();
    for (const auto& t : m.tiers) tiers.push_back(to_json(t));
    return {{"format", "msdon-checkpoint"},
            {"version", checkpoint_version},
            {"kind", "amplitude_separated"},
            {"epsilon", m.epsilon},
            {"tiers", tiers}};
}

// Either model kind; a plain DeepONet loads as a single-tier separated model.
inline AmplitudeSeparatedModel model_from_checkpoint(const nlohmann::json& j)
{
    if (j.value("format", "") != "msdon-checkpoint") throw InputError("checkpoint: not an msdon checkpoint");
    if (j.value("version", 0) != checkpoint_version)
        throw InputError("checkpoint: unsupported version " + std::to_string(j.value("version", 0)));
    AmplitudeSeparatedModel m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "deeponet") {
        m.epsilon = 0.0;
        m.tiers.push_back(deeponet_from_json(j.at("model")));
    } else if (kind == "amplitude_separated") {
        m.epsilon = j.at("epsilon").get<double>();
        for (const auto& t : j.at("tiers")) m.tiers.push_back(deeponet_from_json(t));
        if (m.tiers.empty()) throw InputError("checkpoint: no tiers");
    } else {
        throw InputError("checkpoint: unknown kind '" + kind + "'");
    }
    return m;
}

} // namespace msdon
