#pragma once

// Run configuration read from an INI file with sections
// [run] [building] [generator] [preprocess] [dataset] [model] [training]
// [experiment]. Every key has a default; unknown sections or keys are
// rejected. The defaults reproduce the desk-scale studies.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "msdon/dataset.hpp"
#include "msdon/error.hpp"
#include "msdon/experiments.hpp"
#include "msdon/training.hpp"

namespace msdon {

struct BuildingConfig {
    std::size_t floors = 8;
    double mass = 2.0e5;      // kg per floor
    double stiffness = 2.5e8; // N/m per story
    double damping_ratio = 0.02; // Rayleigh, on modes 1 and 2

    ShearBuildingModel build() const { return default_building(floors, mass, stiffness, damping_ratio); }
};

struct ModelConfig {
    std::string kind = "separated"; // separated | deeponet
    // deeponet
    Variant variant = Variant::bFCN_tMS;
    std::size_t subnets = 20;       // multiscale sides, scales {1, 1+2pi, ...}
    std::size_t subnet_width = 8;
    std::size_t features = 4;       // per subnet
    std::size_t dense_width = 160;  // dense trunk
    std::size_t branch_width = 64;  // dense branch (both kinds)
    Activation branch_activation = Activation::relu;
    Activation trunk_activation = Activation::sin;
    std::size_t hidden_layers = 3;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    BuildingConfig building;
    GenerationConfig generator = desk_generator();
    std::size_t record_count = 20;
    std::size_t downsample_factor = 4;
    int filter_order = 8;
    DatasetConfig dataset;
    ModelConfig model;
    TrainConfig training;
    ExperimentConfig experiment;

    RunConfig()
    {
        training.epochs = 300;
        training.on_the_fly_augmentation = true;
    }

    // Experiment settings with the shared pipeline fields filled in.
    ExperimentConfig experiment_config() const
    {
        ExperimentConfig e = experiment;
        e.seed = seed;
        e.threads = threads;
        e.generator = generator;
        e.records = record_count;
        e.downsample_factor = downsample_factor;
        e.filter_order = filter_order;
        e.building = building.build();
        e.m = dataset.m;
        e.train_fraction = dataset.train_fraction;
        e.batches_per_epoch = training.batches_per_epoch;
        e.batch_size = training.batch_size;
        e.learning_rate = training.learning_rate;
        e.subset_size = training.subset_size;
        e.branch_width = model.branch_width;
        return e;
    }
};

namespace detail {

template <class T>
T parse_value(const std::string& key, const std::string& v);

template <>
inline double parse_value<double>(const std::string& key, const std::string& v)
{
    double out = 0.0;
    if (!csv::parse_double(v, out) || !std::isfinite(out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

template <>
inline std::size_t parse_value<std::size_t>(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        if (v.empty() || v.front() == '-') throw std::invalid_argument(v);
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(out);
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v)
{
    std::vector<std::size_t> out;
    for (auto cell : csv::split(v)) {
        std::string s(cell);
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        if (!s.empty()) out.push_back(parse_value<std::size_t>(key, s));
    }
    return out;
}

inline std::string join(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct ConfigKey {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    std::string help;
};

inline const std::map<std::string, ConfigKey>& config_keys()
{
    using R = RunConfig;
    static const std::map<std::string, ConfigKey> keys = [] {
        std::map<std::string, ConfigKey> k;
        auto num = [&](const std::string& name, auto member, std::string help) {
            using T = std::remove_reference_t<decltype(member(std::declval<R&>()))>;
            k[name] = {[=](R& r, const std::string& v) {
                           if constexpr (std::is_same_v<T, int>)
                               member(r) = static_cast<int>(parse_value<std::size_t>(name, v));
                           else if constexpr (std::is_same_v<T, std::uint64_t> && !std::is_same_v<T, std::size_t>)
                               member(r) = parse_value<std::size_t>(name, v);
                           else
                               member(r) = parse_value<T>(name, v);
                       },
                       [=](const R& r) {
                           const T x = member(const_cast<R&>(r));
                           if constexpr (std::is_same_v<T, double>)
                               return csv::format_double(x);
                           else if constexpr (std::is_same_v<T, bool>)
                               return std::string(x ? "true" : "false");
                           else
                               return std::to_string(x);
                       },
                       std::move(help)};
        };
        num("run.seed", [](R& r) -> std::uint64_t& { return r.seed; }, "RNG seed for every stage");
        num("run.threads", [](R& r) -> std::size_t& { return r.threads; }, "concurrent experiment arms (1 = reproducible order)");

        num("building.floors", [](R& r) -> std::size_t& { return r.building.floors; }, "number of stories");
        num("building.mass", [](R& r) -> double& { return r.building.mass; }, "floor mass, kg");
        num("building.stiffness", [](R& r) -> double& { return r.building.stiffness; }, "story stiffness, N/m");
        num("building.damping_ratio", [](R& r) -> double& { return r.building.damping_ratio; }, "Rayleigh damping ratio on modes 1 and 2");

        num("generator.duration", [](R& r) -> double& { return r.generator.duration; }, "record length, s");
        num("generator.dt", [](R& r) -> double& { return r.generator.dt; }, "sampling step, s");
        num("generator.rise_time", [](R& r) -> double& { return r.generator.rise_time; }, "envelope build-up, s");
        num("generator.plateau_time", [](R& r) -> double& { return r.generator.plateau_time; }, "strong-motion duration, s");
        num("generator.decay_rate", [](R& r) -> double& { return r.generator.decay_rate; }, "coda decay, 1/s");
        k["generator.dominant_frequency"] = {
            [](R& r, const std::string& v) {
                r.generator.omega_g = 2.0 * std::numbers::pi * parse_value<double>("generator.dominant_frequency", v);
            },
            [](const R& r) { return csv::format_double(r.generator.omega_g / (2.0 * std::numbers::pi)); },
            "Kanai-Tajimi ground frequency, Hz"};
        num("generator.zeta_g", [](R& r) -> double& { return r.generator.zeta_g; }, "Kanai-Tajimi ground damping");
        num("generator.intensity", [](R& r) -> double& { return r.generator.intensity; }, "plateau RMS acceleration, m/s^2");
        num("generator.count", [](R& r) -> std::size_t& { return r.record_count; }, "records per ensemble");

        num("preprocess.factor", [](R& r) -> std::size_t& { return r.downsample_factor; }, "decimation factor L");
        num("preprocess.order", [](R& r) -> int& { return r.filter_order; }, "anti-alias Butterworth order");

        num("dataset.sensors", [](R& r) -> std::size_t& { return r.dataset.m; }, "branch sensors m");
        k["dataset.floors"] = {[](R& r, const std::string& v) { r.dataset.floors = parse_list("dataset.floors", v); },
                               [](const R& r) { return join(r.dataset.floors); },
                               "1-based floors to predict, comma separated (empty = top floor)"};
        num("dataset.query_stride", [](R& r) -> std::size_t& { return r.dataset.query_stride; }, "use every k-th solver step as a query time");
        num("dataset.train_fraction", [](R& r) -> double& { return r.dataset.train_fraction; }, "leading fraction of records used for training");
        num("dataset.augment_count", [](R& r) -> std::size_t& { return r.dataset.augmentation.count; }, "stored augmented samples");
        num("dataset.subset_size", [](R& r) -> std::size_t& { return r.dataset.augmentation.subset_size; }, "records mixed per stored augmented sample");
        num("dataset.signed_weights", [](R& r) -> bool& { return r.dataset.augmentation.signed_weights; }, "allow negative mixing weights");

        k["model.kind"] = {[](R& r, const std::string& v) {
                               if (v != "separated" && v != "deeponet")
                                   throw ConfigError("model.kind: expected separated or deeponet, got '" + v + "'");
                               r.model.kind = v;
                           },
                           [](const R& r) { return r.model.kind; }, "separated (amplitude tiers) or deeponet"};
        k["model.variant"] = {[](R& r, const std::string& v) {
                                  try {
                                      r.model.variant = parse_variant(v);
                                  } catch (const InvalidArgument& e) {
                                      throw ConfigError(std::string("model.variant: ") + e.what());
                                  }
                              },
                              [](const R& r) { return to_string(r.model.variant); },
                              "bFCN-tMS, bMS-tFCN, bMS-tMS or bFCN-tFCN (kind = deeponet)"};
        num("model.epsilon", [](R& r) -> double& { return r.experiment.epsilon; }, "tier weight base");
        k["model.tier_steps"] = {[](R& r, const std::string& v) { r.experiment.tier_steps = parse_list("model.tier_steps", v); },
                                 [](const R& r) { return join(r.experiment.tier_steps); },
                                 "per tier K: trunk scales {1, 1+2pi, ..., 1+2pi K}"};
        num("model.tier_width", [](R& r) -> std::size_t& { return r.experiment.tier_width; }, "tier trunk subnet width");
        num("model.tier_features", [](R& r) -> std::size_t& { return r.experiment.tier_features; }, "tier features per subnet");
        num("model.subnets", [](R& r) -> std::size_t& { return r.model.subnets; }, "multiscale subnet count (kind = deeponet)");
        num("model.subnet_width", [](R& r) -> std::size_t& { return r.model.subnet_width; }, "multiscale subnet width (kind = deeponet)");
        num("model.features", [](R& r) -> std::size_t& { return r.model.features; }, "features per subnet (kind = deeponet)");
        num("model.dense_width", [](R& r) -> std::size_t& { return r.model.dense_width; }, "dense trunk width (kind = deeponet)");
        num("model.branch_width", [](R& r) -> std::size_t& { return r.model.branch_width; }, "dense branch width");
        num("model.hidden_layers", [](R& r) -> std::size_t& { return r.model.hidden_layers; }, "hidden layers per network");
        k["model.branch_activation"] = {
            [](R& r, const std::string& v) {
                try {
                    r.model.branch_activation = parse_activation(v);
                } catch (const InvalidArgument& e) {
                    throw ConfigError(std::string("model.branch_activation: ") + e.what());
                }
            },
            [](const R& r) { return to_string(r.model.branch_activation); }, "sin, relu or identity"};
        k["model.trunk_activation"] = {
            [](R& r, const std::string& v) {
                try {
                    r.model.trunk_activation = parse_activation(v);
                } catch (const InvalidArgument& e) {
                    throw ConfigError(std::string("model.trunk_activation: ") + e.what());
                }
            },
            [](const R& r) { return to_string(r.model.trunk_activation); }, "sin, relu or identity"};

        num("training.epochs", [](R& r) -> std::size_t& { return r.training.epochs; }, "epochs");
        num("training.batches_per_epoch", [](R& r) -> std::size_t& { return r.training.batches_per_epoch; }, "Adam steps per epoch");
        num("training.batch_size", [](R& r) -> std::size_t& { return r.training.batch_size; }, "samples per batch");
        num("training.learning_rate", [](R& r) -> double& { return r.training.learning_rate; }, "Adam learning rate");
        num("training.on_the_fly", [](R& r) -> bool& { return r.training.on_the_fly_augmentation; }, "mix fresh superposition samples for every batch");
        num("training.subset_size", [](R& r) -> std::size_t& { return r.training.subset_size; }, "records mixed per on-the-fly sample");
        num("training.signed_weights", [](R& r) -> bool& { return r.training.signed_weights; }, "allow negative on-the-fly weights");

        num("experiment.spacing_subnets", [](R& r) -> std::size_t& { return r.experiment.spacing_subnets; }, "scale-spacing subnets");
        num("experiment.single_record_frequency", [](R& r) -> double& { return r.experiment.single_record_frequency; }, "single-record studies: Kanai-Tajimi ground frequency, Hz");
        num("experiment.single_record_zeta_g", [](R& r) -> double& { return r.experiment.single_record_zeta_g; }, "single-record studies: Kanai-Tajimi ground damping");
        num("experiment.spacing_kappa_up", [](R& r) -> double& { return r.experiment.spacing_kappa_up; }, "scale-spacing largest scale");
        num("experiment.spacing_epochs", [](R& r) -> std::size_t& { return r.experiment.spacing_epochs; }, "scale-spacing epochs");
        num("experiment.mse_threshold", [](R& r) -> double& { return r.experiment.mse_threshold; }, "epochs-to-threshold MSE level");
        num("experiment.structure_epochs", [](R& r) -> std::size_t& { return r.experiment.structure_epochs; }, "structure study epochs");
        num("experiment.structure_subnets", [](R& r) -> std::size_t& { return r.experiment.structure_subnets; }, "structure study subnets");
        num("experiment.structure_subnet_width", [](R& r) -> std::size_t& { return r.experiment.structure_subnet_width; }, "structure study trunk subnet width");
        num("experiment.amplitude_epochs", [](R& r) -> std::size_t& { return r.experiment.amplitude_epochs; }, "amplitude-separation epochs");
        num("experiment.multifloor_epochs", [](R& r) -> std::size_t& { return r.experiment.multifloor_epochs; }, "multifloor epochs");
        num("experiment.pipeline_epochs", [](R& r) -> std::size_t& { return r.experiment.pipeline_epochs; }, "end-to-end pipeline epochs");
        num("experiment.synthetic_train", [](R& r) -> std::size_t& { return r.experiment.synthetic_train; }, "two-tier training samples");
        num("experiment.synthetic_test", [](R& r) -> std::size_t& { return r.experiment.synthetic_test; }, "two-tier test samples");
        return k;
    }();
    return keys;
}

} // namespace detail

// Sets "section.key" from its textual value.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second.set(cfg, value);
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw InputError("config file not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError(path.string() + ": key '" + section + "' outside a section");
        for (const auto& [key, value] : body) set_config_value(cfg, section + "." + key, value.data());
    }
    return cfg;
}

// INI text with every key at its current value.
inline std::string dump_run_config(const RunConfig& cfg)
{
    std::ostringstream out;
    std::string section;
    for (const auto& [name, key] : detail::config_keys()) {
        const auto dot = name.find('.');
        const std::string s = name.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
            section = s;
        }
        out << "; " << key.help << '\n' << name.substr(dot + 1) << " = " << key.get(cfg) << '\n';
    }
    return out.str();
}

} // namespace msdon
