#pragma once

// Comparison studies: trunk scale spacing, the four branch/trunk structures,
// amplitude separation against a monolithic multiscale model, and
// multi-floor prediction. Each study writes summary.json plus per-arm
// <arm>_curves.csv and <arm>_spectrum.csv.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msdon/csv.hpp"
#include "msdon/dataset.hpp"
#include "msdon/deeponet.hpp"
#include "msdon/dsp.hpp"
#include "msdon/error.hpp"
#include "msdon/excitation.hpp"
#include "msdon/structural_dynamics.hpp"
#include "msdon/training.hpp"

namespace msdon {

// {l, 2l, ..., N l} with l = kappa_up / N.
inline std::vector<double> linear_scales(double kappa_up, std::size_t n)
{
    detail::require(kappa_up > 0.0 && n >= 1, "linear_scales: need kappa_up > 0 and n >= 1");
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = kappa_up * static_cast<double>(i + 1) / static_cast<double>(n);
    return s;
}

// {s^0, s^1, ..., s^(N-1)} with s = kappa_up^(1/N).
inline std::vector<double> exponential_scales(double kappa_up, std::size_t n)
{
    detail::require(kappa_up > 0.0 && n >= 1, "exponential_scales: need kappa_up > 0 and n >= 1");
    const double s = std::pow(kappa_up, 1.0 / static_cast<double>(n));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(s, static_cast<double>(i));
    return out;
}

// Ground motion used by the desk studies: short, narrow-band, low-frequency
// records that 100 sensors resolve after 4x decimation.
inline GenerationConfig desk_generator()
{
    GenerationConfig g;
    g.duration = 6.0;
    g.dt = 0.005;
    g.rise_time = 1.0;
    g.plateau_time = 2.0;
    g.decay_rate = 1.5;
    g.omega_g = 2.0 * std::numbers::pi * 1.0;
    g.zeta_g = 0.2;
    return g;
}

struct ExperimentConfig {
    std::uint64_t seed = 0;
    bool paper_scale = false;
    std::size_t threads = 1; // arms run concurrently when > 1

    GenerationConfig generator = desk_generator();
    std::size_t records = 20;
    std::size_t downsample_factor = 4;
    int filter_order = 8;
    ShearBuildingModel building = default_building();
    std::size_t m = 100;
    double train_fraction = 0.8;

    std::size_t batches_per_epoch = 40;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t subset_size = 4;

    // single-record studies: wide-band spectral shape so the response reaches
    // roughly spacing_kappa_up / 2pi cycles per record
    double single_record_frequency = 2.5; // Hz
    double single_record_zeta_g = 0.6;

    // scale spacing
    std::size_t spacing_subnets = 10;
    double spacing_kappa_up = 20.0 * 2.0 * std::numbers::pi;
    std::size_t spacing_epochs = 300;
    double mse_threshold = 1e-6;

    // structures
    std::size_t structure_epochs = 200;
    std::size_t structure_subnets = 20;
    std::size_t structure_subnet_width = 8;
    std::size_t structure_features = 4;    // per subnet
    std::size_t structure_branch_width = 4; // per branch subnet

    // amplitude separation / multifloor
    std::size_t amplitude_epochs = 300;
    std::size_t multifloor_epochs = 300;
    std::size_t pipeline_epochs = 300;
    double epsilon = 0.1;
    std::vector<std::size_t> tier_steps{5, 10, 20}; // tier i scales {1, 1+2pi, ..., 1 + 2pi k_i}
    std::size_t tier_width = 8;
    std::size_t tier_features = 4;
    std::size_t branch_width = 64;
    std::size_t synthetic_train = 64;
    std::size_t synthetic_test = 16;

    ExperimentConfig() = default;

    // Restores the reference sizes and epoch counts.
    void apply_paper_scale()
    {
        paper_scale = true;
        spacing_subnets = 30;
        spacing_kappa_up = 60.0 * 2.0 * std::numbers::pi;
        spacing_epochs = structure_epochs = amplitude_epochs = multifloor_epochs = pipeline_epochs = 1500;
        tier_steps = {10, 50, 100};
        tier_width = 8;
        tier_features = 8;
        branch_width = 128;
        records = 50;
    }
};

struct ExperimentArm {
    std::string name;
    nlohmann::json config;
    MetricHistory history;
    nlohmann::json summary;
    // amplitude spectra of prediction and target; one column pair per output
    std::vector<double> spectrum_frequency;
    std::vector<std::vector<double>> spectrum_target;
    std::vector<std::vector<double>> spectrum_prediction;
};

struct ExperimentReport {
    std::string id;
    std::uint64_t seed = 0;
    std::vector<ExperimentArm> arms;
    nlohmann::json summary;

    const ExperimentArm& arm(const std::string& name) const
    {
        for (const auto& a : arms)
            if (a.name == name) return a;
        throw InvalidArgument("report " + id + ": no arm '" + name + "'");
    }
};

inline void write_report(const ExperimentReport& r, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& a : r.arms) {
        write_history_csv(a.history, dir / (a.name + "_curves.csv"));
        if (!a.spectrum_frequency.empty()) {
            std::vector<std::string> header{"frequency"};
            std::vector<std::vector<double>> cols{a.spectrum_frequency};
            for (std::size_t f = 0; f < a.spectrum_target.size(); ++f) {
                const std::string sfx = a.spectrum_target.size() > 1 ? "_" + std::to_string(f + 1) : "";
                header.push_back("target" + sfx);
                header.push_back("prediction" + sfx);
                cols.push_back(a.spectrum_target[f]);
                cols.push_back(a.spectrum_prediction[f]);
            }
            csv::write_columns(dir / (a.name + "_spectrum.csv"), header, cols);
        }
        arms.push_back({{"name", a.name}, {"config", a.config}, {"summary", a.summary}});
    }
    const nlohmann::json j{{"experiment", r.id}, {"seed", r.seed}, {"arms", arms}, {"summary", r.summary}};
    std::ofstream out(dir / "summary.json");
    if (!out) throw Error("cannot write " + (dir / "summary.json").string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Data

// Generated, decimated records and the dataset built from them.
inline std::vector<SeismicRecord> desk_records(const ExperimentConfig& c, std::size_t count, std::uint64_t seed)
{
    GenerationConfig g = c.generator;
    g.seed = seed;
    std::vector<SeismicRecord> recs = generate_ensemble(g, count);
    for (auto& r : recs) {
        auto y = antialias_downsample(r.series.values, c.downsample_factor, c.filter_order);
        r.series = TimeSeries(r.series.dt * static_cast<double>(c.downsample_factor), std::move(y));
    }
    return recs;
}

// One wide-band record with its top-floor response.
inline std::vector<OperatorSample> single_record_dataset(const ExperimentConfig& c)
{
    ExperimentConfig w = c;
    w.generator.omega_g = 2.0 * std::numbers::pi * c.single_record_frequency;
    w.generator.zeta_g = c.single_record_zeta_g;
    const auto recs = desk_records(w, 1, c.seed);
    const ExcitationResponse p = solve_pair(recs.front(), c.building);
    return {make_sample(p, {c.building.n_floors()}, c.m, 1)};
}

// Linear operator on [0, 1]: the input carries a 2-cycle and a 16-cycle
// component at comparable amplitude; the target keeps the slow part and
// damps the fast part by 10, giving a 10:1 amplitude and 1:8 frequency split.
inline std::vector<OperatorSample> two_tier_samples(std::size_t count, std::size_t m, std::uint64_t seed,
                                                    const std::string& prefix)
{
    constexpr std::size_t grid = 401;
    constexpr double f_low = 2.0, f_high = 16.0, ratio = 0.1;
    const double dt = 1.0 / static_cast<double>(grid - 1);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<OperatorSample> out;
    for (std::size_t s = 0; s < count; ++s) {
        double c[4];
        for (double& v : c) v = normal(rng);
        std::vector<double> u(grid);
        Eigen::MatrixXd y(grid, 1);
        for (std::size_t i = 0; i < grid; ++i) {
            const double t = dt * static_cast<double>(i);
            const double lo = c[0] * std::sin(2 * std::numbers::pi * f_low * t) + c[1] * std::cos(2 * std::numbers::pi * f_low * t);
            const double hi = c[2] * std::sin(2 * std::numbers::pi * f_high * t) + c[3] * std::cos(2 * std::numbers::pi * f_high * t);
            u[i] = lo + hi;
            y(static_cast<Eigen::Index>(i), 0) = lo + ratio * hi;
        }
        std::string id = std::to_string(s);
        if (id.size() < 4) id.insert(0, 4 - id.size(), '0');
        out.push_back(make_sample(prefix + id, TimeSeries(dt, std::move(u)), std::move(y), m, 2));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectra

// Amplitude spectra of target and prediction for output f of sample 0,
// over bins whose angular frequency in normalized time is <= kappa_up.
// Returns the relative L2 between the two spectra.
inline double spectral_capture(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double record_length,
                               double kappa_up, ExperimentArm* arm = nullptr)
{
    const auto n = static_cast<std::size_t>(target.cols());
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = target(0, static_cast<Eigen::Index>(i));
        p[i] = pred(0, static_cast<Eigen::Index>(i));
    }
    const auto ay = amplitude_spectrum(y), ap = amplitude_spectrum(p);
    std::vector<double> fr, ty, tp;
    double num = 0.0, den = 0.0;
    const double step = record_length * static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k) * record_length / step;
        if (w > kappa_up + 1e-9) break;
        fr.push_back(static_cast<double>(k) / step);
        ty.push_back(ay[k]);
        tp.push_back(ap[k]);
        num += (ap[k] - ay[k]) * (ap[k] - ay[k]);
        den += ay[k] * ay[k];
    }
    if (arm) {
        arm->spectrum_frequency = fr;
        arm->spectrum_target.push_back(ty);
        arm->spectrum_prediction.push_back(tp);
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

template <class Fn>
std::vector<ExperimentArm> run_arms(std::size_t n, std::size_t threads, Fn fn)
{
    std::vector<ExperimentArm> arms(n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) arms[i] = fn(i);
        return arms;
    }
    for (std::size_t start = 0; start < n; start += threads) {
        std::vector<std::future<ExperimentArm>> jobs;
        for (std::size_t i = start; i < std::min(n, start + threads); ++i)
            jobs.push_back(std::async(std::launch::async, fn, i));
        for (std::size_t i = 0; i < jobs.size(); ++i) arms[start + i] = jobs[i].get();
    }
    return arms;
}

inline TrainConfig arm_train_config(const ExperimentConfig& c, std::size_t epochs, std::uint64_t seed)
{
    TrainConfig t;
    t.epochs = epochs;
    t.batches_per_epoch = c.batches_per_epoch;
    t.batch_size = c.batch_size;
    t.learning_rate = c.learning_rate;
    t.seed = seed;
    t.subset_size = c.subset_size;
    return t;
}

inline nlohmann::json history_summary(const MetricHistory& h, double threshold)
{
    auto last = [](const std::vector<double>& v) { return v.empty() ? NAN : v.back(); };
    nlohmann::json j{{"epochs", h.epochs()},
                     {"final_train_rel_l2", last(h.train_rel_l2)},
                     {"final_train_mse", last(h.train_mse)},
                     {"epochs_to_mse_threshold", epochs_to_threshold(h, threshold)}};
    const double t = last(h.test_rel_l2);
    j["final_test_rel_l2"] = std::isfinite(t) ? nlohmann::json(t) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Studies

// bFCN-tMS trained twice on one (record, response) pair, differing only in
// the trunk scale schedule.
inline ExperimentReport scale_spacing_study(const ExperimentConfig& c)
{
    const auto data = single_record_dataset(c);
    const Normalization norm = fit_normalization(data);
    const std::size_t n = c.spacing_subnets;
    const std::vector<std::pair<std::string, std::vector<double>>> schedules{
        {"linear", linear_scales(c.spacing_kappa_up, n)}, {"exponential", exponential_scales(c.spacing_kappa_up, n)}};

    auto run = [&](std::size_t i) {
        const auto& [name, scales] = schedules[i];
        DeepONetSpec s;
        s.variant = Variant::bFCN_tMS;
        s.m = c.m;
        s.p = n * (c.paper_scale ? 10 : c.structure_features);
        s.branch = {3, c.paper_scale ? 500 : c.branch_width, Activation::sin, {}};
        s.trunk = {3, c.paper_scale ? 10 : c.structure_subnet_width, Activation::sin, scales};
        DeepONetModel model = build_variant(s, c.seed);
        set_normalization(model, norm);
        TrainConfig tc = arm_train_config(c, c.spacing_epochs, c.seed + 1);
        tc.batch_size = 1;
        auto res = train<DeepONetModel>(data, {}, model, tc);
        ExperimentArm arm;
        arm.name = name;
        arm.config = {{"variant", to_string(s.variant)}, {"trunk_scales", scales}, {"p", s.p}};
        arm.history = std::move(res.history);
        const Batch b = make_batch(data);
        const FloorMatrices pred = predict(res.model, b.inputs, b.times);
        arm.summary = history_summary(arm.history, c.mse_threshold);
        arm.summary["spectral_error"] = spectral_capture(pred[0], b.targets[0], 1.0 / norm.time_scale, c.spacing_kappa_up, &arm);
        return arm;
    };

    ExperimentReport r;
    r.id = "scale-spacing";
    r.seed = c.seed;
    r.arms = run_arms(schedules.size(), c.threads, run);
    r.summary = {{"kappa_up", c.spacing_kappa_up},
                 {"subnets", n},
                 {"mse_threshold", c.mse_threshold},
                 {"linear_final_mse", r.arm("linear").history.train_mse.back()},
                 {"exponential_final_mse", r.arm("exponential").history.train_mse.back()}};
    return r;
}

// Reduced structure sizes: S subnets of w neurons on multiscale sides and
// dense sides holding the same total hidden width.
inline DeepONetSpec desk_structure_spec(const ExperimentConfig& c, Variant v)
{
    const std::size_t s = c.structure_subnets;
    const double kappa = 2.0 * std::numbers::pi * static_cast<double>(s - 1);
    const std::vector<double> scales = offset_scales(1.0 + kappa, s);
    DeepONetSpec spec;
    spec.variant = v;
    spec.m = c.m;
    spec.p = s * c.structure_features;
    spec.branch = branch_is_multiscale(v) ? SideConfig{3, c.structure_branch_width, Activation::sin, scales}
                                          : SideConfig{3, s * c.structure_branch_width, Activation::sin, {}};
    spec.trunk = trunk_is_multiscale(v) ? SideConfig{3, c.structure_subnet_width, Activation::sin, scales}
                                        : SideConfig{3, s * c.structure_subnet_width, Activation::sin, {}};
    return spec;
}

inline double structure_kappa_up(const ExperimentConfig& c)
{
    return c.paper_scale ? 1.0 + 200.0 * std::numbers::pi
                         : 1.0 + 2.0 * std::numbers::pi * static_cast<double>(c.structure_subnets - 1);
}

inline ExperimentReport structure_study(const ExperimentConfig& c)
{
    const auto data = single_record_dataset(c);
    const Normalization norm = fit_normalization(data);
    const double kappa = structure_kappa_up(c);

    auto run = [&](std::size_t i) {
        const Variant v = all_variants[i];
        const DeepONetSpec spec = c.paper_scale ? reference_structure_spec(v, c.m) : desk_structure_spec(c, v);
        DeepONetModel model = build_variant(spec, c.seed);
        set_normalization(model, norm);
        TrainConfig tc = arm_train_config(c, c.structure_epochs, c.seed + 1);
        tc.batch_size = 1;
        auto res = train<DeepONetModel>(data, {}, model, tc);
        ExperimentArm arm;
        arm.name = to_string(v);
        arm.config = {{"variant", arm.name}, {"p", spec.p}, {"parameters", count_parameters(model)}};
        arm.history = std::move(res.history);
        const Batch b = make_batch(data);
        const FloorMatrices pred = predict(res.model, b.inputs, b.times);
        arm.summary = history_summary(arm.history, c.mse_threshold);
        arm.summary["spectral_error"] = spectral_capture(pred[0], b.targets[0], 1.0 / norm.time_scale, kappa, &arm);
        return arm;
    };

    ExperimentReport r;
    r.id = "structures";
    r.seed = c.seed;
    r.arms = run_arms(4, c.threads, run);
    nlohmann::json se;
    for (const auto& a : r.arms) se[a.name] = a.summary["spectral_error"];
    r.summary = {{"kappa_up", kappa}, {"spectral_error", se}};
    return r;
}

inline AmplitudeSeparatedSpec desk_separated_spec(const ExperimentConfig& c, std::size_t floors)
{
    if (c.paper_scale) return reference_amplitude_separated_spec(c.m, floors);
    AmplitudeSeparatedSpec s;
    s.m = c.m;
    s.floors = floors;
    s.epsilon = c.epsilon;
    for (std::size_t k : c.tier_steps)
        s.tier_scales.push_back(offset_scales(1.0 + 2.0 * std::numbers::pi * static_cast<double>(k), k + 1));
    s.features_per_subnet = c.tier_features;
    s.trunk = {3, c.tier_width, Activation::sin, {}};
    s.branch = {3, c.branch_width, Activation::relu, {}};
    return s;
}

// Parameter count of a bFCN-tMS model without building it.
inline std::size_t bfcn_tms_parameter_count(std::size_t m, std::size_t floors, std::size_t subnets, std::size_t k,
                                            std::size_t trunk_width, std::size_t branch_width, std::size_t hidden = 3)
{
    auto dense = [](const std::vector<std::size_t>& sizes) {
        std::size_t n = 0;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i] * sizes[i + 1] + sizes[i + 1];
        return n;
    };
    const std::size_t p = subnets * k;
    return dense(dense_layer_sizes(m, branch_width, hidden, p)) +
           subnets * dense(dense_layer_sizes(1, trunk_width, hidden, k * floors)) + floors;
}

// Monolithic comparator: one bFCN-tMS on the widest tier's scales with trunk
// and branch widths chosen so its parameter count matches the budget. The
// trunk width starts at three times the tier width and shrinks until a
// branch width lands within tolerance.
inline DeepONetSpec matched_monolithic_spec(const AmplitudeSeparatedSpec& sep, std::size_t budget,
                                            double tolerance = 0.05)
{
    const std::vector<double>& scales = sep.tier_scales.back();
    const std::size_t k = sep.features_per_subnet;
    for (std::size_t tw = 3 * sep.trunk.width; tw >= 1; --tw) {
        std::size_t best_bw = 0;
        double best = INFINITY;
        for (std::size_t bw = 1; bw <= 4096; ++bw) {
            const auto n = static_cast<double>(
                bfcn_tms_parameter_count(sep.m, sep.floors, scales.size(), k, tw, bw, sep.branch.hidden_layers));
            const double d = std::abs(n - static_cast<double>(budget)) / static_cast<double>(budget);
            if (d < best) {
                best = d;
                best_bw = bw;
            }
            if (n > static_cast<double>(budget)) break;
        }
        if (best <= tolerance) {
            DeepONetSpec s;
            s.variant = Variant::bFCN_tMS;
            s.m = sep.m;
            s.floors = sep.floors;
            s.p = scales.size() * k;
            s.branch = {sep.branch.hidden_layers, best_bw, sep.branch.activation, {}};
            s.trunk = {sep.trunk.hidden_layers, tw, sep.trunk.activation, scales};
            return s;
        }
    }
    throw InvalidArgument("matched_monolithic_spec: no width pair matches the parameter budget");
}

// Sizes of the large monolithic model in the reference comparison.
inline DeepONetSpec reference_monolithic_spec(std::size_t m, std::size_t floors)
{
    DeepONetSpec s;
    s.variant = Variant::bFCN_tMS;
    s.m = m;
    s.floors = floors;
    s.p = 1000;
    s.branch = {3, 384, Activation::relu, {}};
    s.trunk = {3, 24, Activation::sin, offset_scales(1.0 + 200.0 * std::numbers::pi, 100)};
    return s;
}

inline ExperimentReport amplitude_separation_study(const ExperimentConfig& c)
{
    const auto train_set = two_tier_samples(c.synthetic_train, c.m, c.seed, "train-");
    const auto test_set = two_tier_samples(c.synthetic_test, c.m, c.seed + 1000003, "test-");
    const Normalization norm = fit_normalization(train_set);
    const AmplitudeSeparatedSpec sep = desk_separated_spec(c, 1);

    std::size_t budget = 0;
    {
        AmplitudeSeparatedModel probe = build_amplitude_separated(sep, c.seed);
        budget = count_parameters(probe);
    }
    const DeepONetSpec mono = c.paper_scale ? reference_monolithic_spec(c.m, 1) : matched_monolithic_spec(sep, budget);
    const double kappa = sep.tier_scales.back().back();

    auto finish = [&](ExperimentArm& arm, const auto& model) {
        const Batch b = make_batch(test_set);
        const FloorMatrices pred = predict(model, b.inputs, b.times);
        arm.summary = history_summary(arm.history, c.mse_threshold);
        arm.summary["final_test_rel_l2"] = evaluate(model, test_set);
        arm.summary["spectral_error"] = spectral_capture(pred[0], b.targets[0], 1.0, kappa, &arm);
    };

    auto run = [&](std::size_t i) {
        ExperimentArm arm;
        const TrainConfig tc = arm_train_config(c, c.amplitude_epochs, c.seed + 1);
        if (i == 0) {
            AmplitudeSeparatedModel model = build_amplitude_separated(sep, c.seed);
            set_normalization(model, norm);
            arm.name = "separated";
            arm.config = {{"tiers", sep.tier_scales.size()},
                          {"epsilon", sep.epsilon},
                          {"parameters", count_parameters(model)},
                          {"tier_scale_caps", [&] {
                               std::vector<double> caps;
                               for (const auto& s : sep.tier_scales) caps.push_back(s.back());
                               return caps;
                           }()}};
            auto res = train<AmplitudeSeparatedModel>(train_set, test_set, model, tc);
            arm.history = std::move(res.history);
            finish(arm, res.model);
        } else {
            DeepONetModel model = build_variant(mono, c.seed);
            set_normalization(model, norm);
            arm.name = "monolithic";
            arm.config = {{"parameters", count_parameters(model)},
                          {"trunk_subnets", mono.trunk.scales.size()},
                          {"trunk_width", mono.trunk.width},
                          {"branch_width", mono.branch.width}};
            auto res = train<DeepONetModel>(train_set, test_set, model, tc);
            arm.history = std::move(res.history);
            finish(arm, res.model);
        }
        return arm;
    };

    ExperimentReport r;
    r.id = "amplitude-separation";
    r.seed = c.seed;
    r.arms = run_arms(2, c.threads, run);
    const double ps = r.arm("separated").config["parameters"].get<double>();
    const double pm = r.arm("monolithic").config["parameters"].get<double>();
    r.summary = {{"separated_final_test_rel_l2", r.arm("separated").summary["final_test_rel_l2"]},
                 {"monolithic_final_test_rel_l2", r.arm("monolithic").summary["final_test_rel_l2"]},
                 {"parameter_ratio", pm / ps},
                 {"reference_final_test_rel_l2", 0.13}};
    return r;
}

// Amplitude-separated model on generated records for the given floors;
// returns the trained model through *trained when given.
inline ExperimentReport records_study(const ExperimentConfig& c, const std::vector<std::size_t>& floors,
                                      const std::string& id, std::size_t epochs,
                                      AmplitudeSeparatedModel* trained = nullptr)
{
    const auto recs = desk_records(c, c.records, c.seed);
    DatasetConfig dc;
    dc.m = c.m;
    dc.floors = floors;
    dc.train_fraction = c.train_fraction;
    const Dataset ds = build_dataset(recs, c.building, NewmarkParams{}, dc);
    const AmplitudeSeparatedSpec spec = desk_separated_spec(c, floors.size());
    AmplitudeSeparatedModel model = build_amplitude_separated(spec, c.seed);
    set_normalization(model, fit_normalization(ds.train));
    TrainConfig tc = arm_train_config(c, epochs, c.seed + 1);
    tc.on_the_fly_augmentation = true;
    auto res = train<AmplitudeSeparatedModel>(ds.train, ds.test, model, tc);

    ExperimentArm arm;
    arm.name = id;
    arm.config = {{"floors", floors}, {"parameters", count_parameters(res.model)}, {"epsilon", spec.epsilon}};
    arm.history = std::move(res.history);
    arm.summary = history_summary(arm.history, c.mse_threshold);

    const Batch b = make_batch(ds.test);
    const FloorMatrices pred = predict(res.model, b.inputs, b.times);
    nlohmann::json per_floor = nlohmann::json::array();
    std::vector<std::pair<double, std::size_t>> amp;
    const double kappa = spec.tier_scales.back().back();
    const double length = b.times(b.times.size() - 1);
    for (std::size_t f = 0; f < floors.size(); ++f) {
        double rel = 0.0;
        for (Eigen::Index i = 0; i < b.targets[f].rows(); ++i)
            rel += (pred[f].row(i) - b.targets[f].row(i)).norm() / b.targets[f].row(i).norm();
        rel /= static_cast<double>(b.targets[f].rows());
        const double mean_amp = b.max_abs.col(static_cast<Eigen::Index>(f)).mean();
        amp.emplace_back(mean_amp, floors[f]);
        // dominant frequency of the first test target
        std::vector<double> y(static_cast<std::size_t>(b.targets[f].cols()));
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = b.targets[f](0, static_cast<Eigen::Index>(j));
        const auto spec_y = amplitude_spectrum(y);
        std::size_t kmax = 1;
        for (std::size_t k = 1; k <= y.size() / 2; ++k)
            if (spec_y[k] > spec_y[kmax]) kmax = k;
        const double df = 1.0 / (length * static_cast<double>(y.size()) / static_cast<double>(y.size() - 1));
        const double se = spectral_capture(pred[f], b.targets[f], length, kappa, &arm);
        per_floor.push_back({{"floor", floors[f]},
                             {"test_rel_l2", rel},
                             {"mean_max_abs", mean_amp},
                             {"dominant_frequency_hz", df * static_cast<double>(kmax)},
                             {"spectral_error", se}});
    }
    std::sort(amp.begin(), amp.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> ranking;
    for (const auto& a : amp) ranking.push_back(a.second);
    arm.summary["per_floor"] = per_floor;

    ExperimentReport r;
    r.id = id;
    r.seed = c.seed;
    r.arms.push_back(std::move(arm));
    r.summary = {{"floors", floors},
                 {"final_test_rel_l2", r.arms[0].history.test_rel_l2.back()},
                 {"amplitude_ranking", ranking}};
    if (trained) *trained = std::move(res.model);
    return r;
}

inline ExperimentReport multifloor_study(const ExperimentConfig& c, std::vector<std::size_t> floors = {},
                                         AmplitudeSeparatedModel* trained = nullptr)
{
    if (floors.empty())
        for (std::size_t f = 2; f <= c.building.n_floors(); ++f) floors.push_back(f);
    if (floors.size() < 2) throw InvalidArgument("multifloor_study: need at least two floors");
    return records_study(c, floors, "multifloor", c.multifloor_epochs, trained);
}

// Generated records through decimation, dataset and the separated model on
// the top floor.
inline ExperimentReport pipeline_study(const ExperimentConfig& c, AmplitudeSeparatedModel* trained = nullptr)
{
    return records_study(c, {c.building.n_floors()}, "pipeline", c.pipeline_epochs, trained);
}

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names{"scale-spacing", "structures", "amplitude-separation", "multifloor",
                                                "pipeline"};
    return names;
}

inline ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& c)
{
    if (name == "scale-spacing") return scale_spacing_study(c);
    if (name == "structures") return structure_study(c);
    if (name == "amplitude-separation") return amplitude_separation_study(c);
    if (name == "multifloor") return multifloor_study(c);
    if (name == "pipeline") return pipeline_study(c);
    std::string valid;
    for (const auto& n : experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown experiment '" + name + "' (valid: " + valid + ")");
}

} // namespace msdon
