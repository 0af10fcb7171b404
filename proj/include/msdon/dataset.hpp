#pragma once

// Supervised operator-learning samples and superposition augmentation.
//
// A base pair is a ground-acceleration record together with the displacement
// history of every floor. Because the structure is linear, any weighted sum
// of pairs with weights summing to one is again a valid pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msdon/csv.hpp"
#include "msdon/error.hpp"
#include "msdon/excitation.hpp"
#include "msdon/structural_dynamics.hpp"
#include "msdon/time_series.hpp"

namespace msdon {

struct ExcitationResponse {
    std::string id;
    std::vector<std::string> sources; // base ids mixed into this pair (itself for a base pair)
    std::vector<double> weights;
    TimeSeries excitation;    // ground acceleration
    Eigen::MatrixXd response; // displacements, floors x steps
};

inline ExcitationResponse solve_pair(const SeismicRecord& record, const ShearBuildingModel& building,
                                     const NewmarkParams& params = {})
{
    ExcitationResponse p;
    p.id = record.id;
    p.sources = {record.id};
    p.weights = {1.0};
    p.excitation = record.series;
    p.response = seismic_response(building, record.series, params.beta, params.gamma).displacements;
    return p;
}

struct AugmentationConfig {
    std::size_t subset_size = 4;
    std::size_t count = 0;
    bool signed_weights = false;
    std::uint64_t seed = 0;
};

// Weights on the simplex sum_i w_i = 1. Default law: w_i = g_i / sum g with
// g_i ~ U(0, 1). The signed law recentres g_i ~ U(-1, 1) so the sum is one.
inline std::vector<double> draw_weights(std::size_t k, bool signed_weights, std::mt19937_64& rng)
{
    detail::require(k >= 1, "draw_weights: need at least one weight");
    std::vector<double> w(k);
    if (signed_weights) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double mean = 0.0;
        for (auto& v : w) mean += (v = u(rng));
        mean /= static_cast<double>(k);
        for (auto& v : w) v += 1.0 / static_cast<double>(k) - mean;
        return w;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double sum = 0.0;
    while (!(sum > 0.0)) {
        sum = 0.0;
        for (auto& v : w) sum += (v = u(rng));
    }
    for (auto& v : w) v /= sum;
    return w;
}

// k distinct indices out of n (partial Fisher-Yates).
inline std::vector<std::size_t> draw_subset(std::size_t n, std::size_t k, std::mt19937_64& rng)
{
    detail::require(k >= 1 && k <= n, "draw_subset: subset size must lie in [1, n]");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

inline ExcitationResponse combine_pairs(std::span<const ExcitationResponse> base, const std::vector<std::size_t>& idx,
                                        const std::vector<double>& w)
{
    detail::require(!idx.empty() && idx.size() == w.size(), "combine_pairs: index/weight mismatch");
    const ExcitationResponse& first = base[idx.front()];
    ExcitationResponse out;
    out.excitation = TimeSeries(first.excitation.dt, std::vector<double>(first.excitation.size(), 0.0));
    out.response = Eigen::MatrixXd::Zero(first.response.rows(), first.response.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const ExcitationResponse& b = base[idx[i]];
        if (b.excitation.size() != first.excitation.size() || b.excitation.dt != first.excitation.dt ||
            b.response.rows() != first.response.rows() || b.response.cols() != first.response.cols())
            throw InvalidArgument("augment_superposition: base pairs must share dt, length and floor count");
        for (std::size_t s = 0; s < b.excitation.size(); ++s) out.excitation.values[s] += w[i] * b.excitation[s];
        out.response += w[i] * b.response;
        out.sources.push_back(b.id);
    }
    out.weights = w;
    return out;
}

inline std::vector<ExcitationResponse> augment_superposition(std::span<const ExcitationResponse> base,
                                                             const AugmentationConfig& config)
{
    if (base.empty()) throw InvalidArgument("augment_superposition: empty base set");
    if (config.subset_size < 1 || config.subset_size > base.size())
        throw InvalidArgument("augment_superposition: subset_size " + std::to_string(config.subset_size) +
                              " not in [1, " + std::to_string(base.size()) + "]");
    std::mt19937_64 rng(config.seed);
    std::vector<ExcitationResponse> out;
    out.reserve(config.count);
    for (std::size_t c = 0; c < config.count; ++c) {
        const auto idx = draw_subset(base.size(), config.subset_size, rng);
        const auto w = draw_weights(config.subset_size, config.signed_weights, rng);
        out.push_back(combine_pairs(base, idx, w));
        std::string n = std::to_string(c);
        if (n.size() < 6) n.insert(0, 6 - n.size(), '0');
        out.back().id = "aug-" + n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sensors

// Values at m equispaced times spanning [0, duration], endpoints included,
// linearly interpolated between grid samples.
inline std::vector<double> sample_sensors(const TimeSeries& series, std::size_t m)
{
    if (m < 2) throw InvalidArgument("sample_sensors: need m >= 2");
    const std::size_t n = series.size();
    if (m > n)
        throw InvalidArgument("sample_sensors: m = " + std::to_string(m) + " exceeds record length " +
                              std::to_string(n));
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        // position on the grid in units of samples
        const double pos = static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
        auto i0 = static_cast<std::size_t>(std::floor(pos));
        if (i0 >= n - 1) {
            out[j] = series.values[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i0);
        out[j] = frac == 0.0 ? series.values[i0] : (1.0 - frac) * series.values[i0] + frac * series.values[i0 + 1];
    }
    return out;
}

inline std::vector<double> sample_sensors(const SeismicRecord& record, std::size_t m)
{
    return sample_sensors(record.series, m);
}

// ---------------------------------------------------------------------------
// Operator samples

struct OperatorSample {
    std::string id;
    bool augmented = false;
    std::vector<std::string> sources;
    TimeSeries excitation;             // full grid
    Eigen::MatrixXd response;          // full grid, steps x l
    std::vector<double> branch_input;  // m sensor values
    std::vector<double> query_times;   // T_q
    Eigen::MatrixXd targets;           // T_q x l
    std::vector<double> max_abs_target; // l

    std::size_t floors() const { return static_cast<std::size_t>(response.cols()); }
};

struct DatasetConfig {
    std::size_t m = 100;
    std::vector<std::size_t> floors; // 1-based floor numbers; empty = top floor
    std::size_t query_stride = 1;    // every k-th solver step is a query time
    double train_fraction = 0.8;
    AugmentationConfig augmentation;
};

inline std::vector<std::size_t> resolve_floors(const DatasetConfig& cfg, std::size_t n_floors)
{
    std::vector<std::size_t> f = cfg.floors.empty() ? std::vector<std::size_t>{n_floors} : cfg.floors;
    for (std::size_t x : f)
        if (x < 1 || x > n_floors)
            throw InvalidArgument("dataset: floor " + std::to_string(x) + " outside 1.." + std::to_string(n_floors));
    return f;
}

// Builds a sample from a full-grid excitation and the selected floor
// responses (steps x l).
inline OperatorSample make_sample(std::string id, const TimeSeries& excitation, Eigen::MatrixXd response, std::size_t m,
                                  std::size_t query_stride)
{
    detail::require(query_stride >= 1, "make_sample: query_stride must be >= 1");
    detail::require(static_cast<std::size_t>(response.rows()) == excitation.size(),
                    "make_sample: response and excitation lengths differ");
    OperatorSample s;
    s.id = std::move(id);
    s.excitation = excitation;
    s.response = std::move(response);
    s.branch_input = sample_sensors(excitation, m);
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < excitation.size(); i += query_stride) {
        rows.push_back(static_cast<Eigen::Index>(i));
        s.query_times.push_back(excitation.time(i));
    }
    s.targets = s.response(rows, Eigen::all);
    s.max_abs_target.resize(s.floors());
    for (std::size_t f = 0; f < s.floors(); ++f) {
        const double v = s.targets.col(static_cast<Eigen::Index>(f)).cwiseAbs().maxCoeff();
        if (!(v > 0.0))
            throw InvalidArgument("dataset: sample " + s.id + " has an identically zero target on output " +
                                  std::to_string(f + 1));
        s.max_abs_target[f] = v;
    }
    return s;
}

inline OperatorSample make_sample(const ExcitationResponse& pair, const std::vector<std::size_t>& floors, std::size_t m,
                                  std::size_t query_stride)
{
    Eigen::MatrixXd resp(pair.response.cols(), static_cast<Eigen::Index>(floors.size()));
    for (std::size_t f = 0; f < floors.size(); ++f)
        resp.col(static_cast<Eigen::Index>(f)) = pair.response.row(static_cast<Eigen::Index>(floors[f] - 1)).transpose();
    OperatorSample s = make_sample(pair.id, pair.excitation, std::move(resp), m, query_stride);
    s.sources = pair.sources;
    s.augmented = pair.sources.size() != 1 || pair.id != pair.sources.front();
    return s;
}

// Weighted sum of samples sharing grid, sensors and query times. Sensor
// sampling is linear, so this equals building a sample from the mixed pair.
inline OperatorSample combine_samples(std::span<const OperatorSample> base, const std::vector<std::size_t>& idx,
                                      const std::vector<double>& w, std::string id = "mix")
{
    detail::require(!idx.empty() && idx.size() == w.size(), "combine_samples: index/weight mismatch");
    const OperatorSample& first = base[idx.front()];
    OperatorSample s;
    s.id = std::move(id);
    s.augmented = true;
    s.query_times = first.query_times;
    s.branch_input.assign(first.branch_input.size(), 0.0);
    s.targets = Eigen::MatrixXd::Zero(first.targets.rows(), first.targets.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const OperatorSample& b = base[idx[i]];
        detail::require(b.branch_input.size() == s.branch_input.size() && b.targets.rows() == s.targets.rows() &&
                            b.targets.cols() == s.targets.cols(),
                        "combine_samples: incompatible samples");
        for (std::size_t j = 0; j < s.branch_input.size(); ++j) s.branch_input[j] += w[i] * b.branch_input[j];
        s.targets += w[i] * b.targets;
        s.sources.push_back(b.id);
    }
    s.max_abs_target.resize(static_cast<std::size_t>(s.targets.cols()));
    for (Eigen::Index f = 0; f < s.targets.cols(); ++f) {
        const double v = s.targets.col(f).cwiseAbs().maxCoeff();
        s.max_abs_target[static_cast<std::size_t>(f)] = v > 0.0 ? v : 1.0;
    }
    return s;
}

struct Dataset {
    std::size_t m = 0;
    std::vector<std::size_t> floors;
    std::size_t query_stride = 1;
    double dt = 0.0;
    double train_fraction = 0.8;
    std::vector<OperatorSample> train; // base samples first, then any augmented ones
    std::vector<OperatorSample> test;

    std::vector<OperatorSample> train_base() const
    {
        std::vector<OperatorSample> out;
        for (const auto& s : train)
            if (!s.augmented) out.push_back(s);
        return out;
    }
};

inline std::pair<std::size_t, std::size_t> split_counts(std::size_t n, double train_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw InvalidArgument("dataset: train fraction must lie in (0, 1]");
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train > n) throw InvalidArgument("dataset: split leaves no training records");
    if (train_fraction < 1.0 && n_train == n) throw InvalidArgument("dataset: split leaves no test records");
    return {n_train, n - n_train};
}

// First round(fraction * n) records train, the rest test. Augmented samples
// mix train records only.
inline Dataset build_dataset(const std::vector<SeismicRecord>& records, const ShearBuildingModel& building,
                             const NewmarkParams& solver, const DatasetConfig& cfg)
{
    if (records.empty()) throw InvalidArgument("build_dataset: no records");
    const auto [n_train, n_test] = split_counts(records.size(), cfg.train_fraction);
    for (const auto& r : records)
        if (r.series.size() != records.front().series.size() ||
            std::abs(r.series.dt - records.front().series.dt) > 1e-12 * records.front().series.dt)
            throw InvalidArgument("build_dataset: record " + r.id + " differs in dt or length from " +
                                  records.front().id);

    Dataset ds;
    ds.m = cfg.m;
    ds.floors = resolve_floors(cfg, building.n_floors());
    ds.query_stride = cfg.query_stride;
    ds.dt = records.front().series.dt;
    ds.train_fraction = cfg.train_fraction;

    std::vector<ExcitationResponse> base;
    for (std::size_t i = 0; i < records.size(); ++i) {
        ExcitationResponse p = solve_pair(records[i], building, solver);
        OperatorSample s = make_sample(p, ds.floors, cfg.m, cfg.query_stride);
        if (i < n_train) {
            ds.train.push_back(std::move(s));
            base.push_back(std::move(p));
        } else {
            ds.test.push_back(std::move(s));
        }
    }
    (void)n_test;
    if (cfg.augmentation.count > 0)
        for (const auto& p : augment_superposition(base, cfg.augmentation))
            ds.train.push_back(make_sample(p, ds.floors, cfg.m, cfg.query_stride));
    return ds;
}

// ---------------------------------------------------------------------------
// Serialization: manifest.json plus samples/<id>.csv with columns
// t, P, y<floor>... on the full grid.

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir / "samples");
    nlohmann::json samples = nlohmann::json::array();
    auto emit = [&](const OperatorSample& s, const char* split) {
        std::vector<std::string> header{"t", "P"};
        for (std::size_t f : ds.floors) header.push_back("y" + std::to_string(f));
        const std::string file = "samples/" + s.id + ".csv";
        csv::Writer w(dir / file, header);
        std::vector<double> row(header.size());
        for (std::size_t i = 0; i < s.excitation.size(); ++i) {
            row[0] = s.excitation.time(i);
            row[1] = s.excitation[i];
            for (std::size_t f = 0; f < s.floors(); ++f)
                row[2 + f] = s.response(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
            w.row(row);
        }
        samples.push_back({{"id", s.id}, {"split", split}, {"augmented", s.augmented}, {"sources", s.sources},
                           {"file", file}});
    };
    for (const auto& s : ds.train) emit(s, "train");
    for (const auto& s : ds.test) emit(s, "test");
    const nlohmann::json manifest{{"format", "msdon-dataset"},
                                  {"version", 1},
                                  {"m", ds.m},
                                  {"floors", ds.floors},
                                  {"query_stride", ds.query_stride},
                                  {"dt", ds.dt},
                                  {"train_fraction", ds.train_fraction},
                                  {"samples", samples}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir)
{
    const auto mpath = dir / "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw InputError("cannot open " + mpath.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(mpath.string() + ": " + e.what());
    }
    if (j.value("format", "") != "msdon-dataset") throw InputError(mpath.string() + ": not a dataset manifest");
    Dataset ds;
    ds.m = j.at("m").get<std::size_t>();
    ds.floors = j.at("floors").get<std::vector<std::size_t>>();
    ds.query_stride = j.at("query_stride").get<std::size_t>();
    ds.dt = j.at("dt").get<double>();
    ds.train_fraction = j.at("train_fraction").get<double>();
    for (const auto& e : j.at("samples")) {
        const csv::Table t = csv::read(dir / e.at("file").get<std::string>());
        if (t.rows.empty() || t.rows.front().size() != 2 + ds.floors.size())
            throw InputError("dataset sample " + e.at("id").get<std::string>() + ": unexpected column count");
        const std::size_t n = t.rows.size();
        Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.floors.size()));
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = t.rows[i][1];
            for (std::size_t f = 0; f < ds.floors.size(); ++f)
                resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = t.rows[i][2 + f];
        }
        OperatorSample s = make_sample(e.at("id").get<std::string>(), TimeSeries(ds.dt, std::move(p)), std::move(resp),
                                       ds.m, ds.query_stride);
        s.augmented = e.at("augmented").get<bool>();
        s.sources = e.at("sources").get<std::vector<std::string>>();
        (e.at("split").get<std::string>() == "test" ? ds.test : ds.train).push_back(std::move(s));
    }
    return ds;
}

} // namespace msdon
