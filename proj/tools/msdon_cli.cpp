// msdon command-line driver.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msdon/config.hpp"
#include "msdon/experiments.hpp"
#include "msdon/msdon.hpp"

namespace fs = std::filesystem;
using namespace msdon;

namespace {

constexpr int exit_config = 2;
constexpr int exit_input = 3;
constexpr int exit_runtime = 4;

const char* formats_help = R"(Output formats:
  CSV files have a header row, '.' decimal point, shortest round-trip numbers
  and newline-terminated rows.
    record          time,acceleration
    spectrum        frequency,before,after          (Hz, DFT magnitudes)
    dataset sample  t,P,y<floor>...                 (P = ground acceleration)
    metrics         epoch,train_rel_l2,test_rel_l2,train_mse
    prediction      t,y<floor>...
  JSON files: manifest.json (records or dataset), checkpoint.json (model),
  summary.json (experiment report).
Exit codes: 0 ok, 2 configuration error, 3 missing input, 4 runtime failure.)";

void write_json(const fs::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// Records listed by manifest.json, or every CSV in the directory.
std::vector<SeismicRecord> load_records(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        const auto j = read_json(manifest);
        if (!j.contains("records")) throw InputError(manifest.string() + ": no record list");
        for (const auto& r : j.at("records")) files.push_back(dir / r.at("file").get<std::string>());
    } else {
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw InputError("no records in " + dir.string());
    std::vector<SeismicRecord> out;
    for (const auto& f : files) out.push_back(import_record_csv(f));
    return out;
}

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 0;
};

RunConfig resolve_config(const Globals& g)
{
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
    if (g.seed_set) cfg.seed = g.seed;
    if (g.threads > 0) cfg.threads = g.threads;
    return cfg;
}

void cmd_generate(const RunConfig& cfg, const fs::path& out)
{
    fs::create_directories(out);
    GenerationConfig g = cfg.generator;
    g.seed = cfg.seed;
    const auto recs = generate_ensemble(g, cfg.record_count);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : recs) {
        const std::string file = r.id + ".csv";
        export_record_csv(r, out / file);
        list.push_back({{"id", r.id}, {"seed", r.seed}, {"file", file}, {"samples", r.series.size()}});
    }
    const nlohmann::json manifest{{"format", "msdon-records"},
                                  {"dt", g.dt},
                                  {"generator",
                                   {{"duration", g.duration},
                                    {"rise_time", g.rise_time},
                                    {"plateau_time", g.plateau_time},
                                    {"decay_rate", g.decay_rate},
                                    {"omega_g", g.omega_g},
                                    {"zeta_g", g.zeta_g},
                                    {"intensity", g.intensity},
                                    {"seed", g.seed}}},
                                  {"records", list}};
    write_json(out / "manifest.json", manifest);
    std::cout << "wrote " << recs.size() << " records to " << out.string() << '\n';
}

void cmd_preprocess(const RunConfig& cfg, const fs::path& in, const fs::path& out)
{
    const auto recs = load_records(in);
    fs::create_directories(out / "spectra");
    const std::size_t L = cfg.downsample_factor;
    nlohmann::json list = nlohmann::json::array();
    std::vector<std::string> failures;
    for (const auto& r : recs) {
        if (r.series.size() % L != 0) {
            failures.push_back(r.id + ": length " + std::to_string(r.series.size()) + " not divisible by " +
                               std::to_string(L));
            continue;
        }
        const auto y = antialias_downsample(r.series.values, L, cfg.filter_order);
        SeismicRecord o = r;
        o.series = TimeSeries(r.series.dt * static_cast<double>(L), y);
        const std::string file = r.id + ".csv";
        export_record_csv(o, out / file);

        // before/after magnitudes on the post-decimation band
        const auto before = amplitude_spectrum(r.series.values);
        const auto after = amplitude_spectrum(y);
        const double df = 1.0 / (r.series.dt * static_cast<double>(r.series.size()));
        std::vector<double> fr(after.size() / 2 + 1), b(fr.size()), a(fr.size());
        for (std::size_t k = 0; k < fr.size(); ++k) {
            fr[k] = df * static_cast<double>(k);
            b[k] = before[k];
            a[k] = after[k];
        }
        csv::write_columns(out / "spectra" / (r.id + "_spectrum.csv"), {"frequency", "before", "after"}, {fr, b, a});
        list.push_back({{"id", r.id},
                        {"file", file},
                        {"samples", y.size()},
                        {"downsampling_theorem_deviation", verify_downsampling_theorem(r.series.values, L)}});
    }
    if (!failures.empty()) {
        std::string msg = "preprocess: " + std::to_string(failures.size()) + " record(s) rejected";
        for (const auto& f : failures) msg += "\n  " + f;
        throw InputError(msg);
    }
    write_json(out / "manifest.json", {{"format", "msdon-records"},
                                       {"dt", recs.front().series.dt * static_cast<double>(L)},
                                       {"factor", L},
                                       {"filter_order", cfg.filter_order},
                                       {"records", list}});
    std::cout << "preprocessed " << recs.size() << " records (L=" << L << ", order " << cfg.filter_order << ") into "
              << out.string() << '\n';
}

Dataset dataset_from(const RunConfig& cfg, const fs::path& dir)
{
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest) && read_json(manifest).value("format", "") == "msdon-dataset") return load_dataset(dir);
    DatasetConfig dc = cfg.dataset;
    dc.augmentation.seed = cfg.seed;
    return build_dataset(load_records(dir), cfg.building.build(), NewmarkParams{}, dc);
}

void cmd_build_dataset(const RunConfig& cfg, const fs::path& in, const fs::path& out)
{
    const Dataset ds = dataset_from(cfg, in);
    save_dataset(ds, out);
    std::cout << "dataset: " << ds.train.size() << " train / " << ds.test.size() << " test samples in " << out.string()
              << '\n';
}

template <class Model>
void train_and_save(const RunConfig& cfg, const Dataset& ds, Model model, const fs::path& out)
{
    set_normalization(model, fit_normalization(ds.train));
    TrainConfig tc = cfg.training;
    tc.seed = cfg.seed + 1;
    const auto t0 = std::chrono::steady_clock::now();
    auto res = train<Model>(ds.train, ds.test, std::move(model), tc, [&](std::size_t e, const MetricHistory& h) {
        if (e % 25 == 0 || e == tc.epochs)
            std::cerr << "epoch " << e << "  train " << h.train_rel_l2.back() << "  test " << h.test_rel_l2.back()
                      << '\n';
    });
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json ck = checkpoint_json(res.model);
    ck["floors"] = ds.floors;
    write_json(out / "checkpoint.json", ck);
    write_history_csv(res.history, out / "metrics.csv");
    const double test = ds.test.empty() ? NAN : evaluate(res.model, ds.test);
    std::cout << "parameters " << count_parameters(res.model) << "\ntraining time " << sec << " s\n"
              << "final test relative L2 " << csv::format_double(test) << '\n';
}

void cmd_train(const RunConfig& cfg, const fs::path& in, const fs::path& out)
{
    const Dataset ds = dataset_from(cfg, in);
    fs::create_directories(out);
    const std::size_t floors = ds.floors.size();
    const ExperimentConfig ec = cfg.experiment_config();
    if (cfg.model.kind == "separated") {
        AmplitudeSeparatedSpec spec = desk_separated_spec(ec, floors);
        spec.m = ds.m;
        spec.branch = {cfg.model.hidden_layers, cfg.model.branch_width, cfg.model.branch_activation, {}};
        spec.trunk = {cfg.model.hidden_layers, ec.tier_width, cfg.model.trunk_activation, {}};
        train_and_save(cfg, ds, build_amplitude_separated(spec, cfg.seed), out);
    } else {
        const auto& mc = cfg.model;
        const std::vector<double> scales =
            offset_scales(1.0 + 2.0 * std::numbers::pi * static_cast<double>(mc.subnets - 1), mc.subnets);
        DeepONetSpec s;
        s.variant = mc.variant;
        s.m = ds.m;
        s.floors = floors;
        s.p = mc.subnets * mc.features;
        s.branch = branch_is_multiscale(mc.variant)
                       ? SideConfig{mc.hidden_layers, std::max<std::size_t>(1, mc.branch_width / mc.subnets), mc.branch_activation, scales}
                       : SideConfig{mc.hidden_layers, mc.branch_width, mc.branch_activation, {}};
        s.trunk = trunk_is_multiscale(mc.variant) ? SideConfig{mc.hidden_layers, mc.subnet_width, mc.trunk_activation, scales}
                                                  : SideConfig{mc.hidden_layers, mc.dense_width, mc.trunk_activation, {}};
        train_and_save(cfg, ds, build_variant(s, cfg.seed), out);
    }
}

void cmd_predict(const fs::path& checkpoint, const fs::path& record, const fs::path& out, std::size_t points)
{
    if (!fs::exists(checkpoint)) throw InputError("checkpoint not found: " + checkpoint.string());
    const nlohmann::json ck = read_json(checkpoint);
    const AmplitudeSeparatedModel model = model_from_checkpoint(ck);
    const SeismicRecord rec = import_record_csv(record);
    if (rec.series.size() < model.m())
        throw InputError(record.string() + ": " + std::to_string(rec.series.size()) + " samples cannot feed " +
                         std::to_string(model.m()) + " sensors");

    const std::size_t n = points > 0 ? points : rec.series.size();
    Eigen::VectorXd times(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        times(static_cast<Eigen::Index>(i)) =
            n == 1 ? 0.0 : rec.series.duration() * static_cast<double>(i) / static_cast<double>(n - 1);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> u = sample_sensors(rec, model.m());
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    const FloorMatrices y = predict(model, in, times);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<std::string> header{"t"};
    std::vector<std::vector<double>> cols{std::vector<double>(times.data(), times.data() + times.size())};
    const auto floors = ck.value("floors", std::vector<std::size_t>{});
    for (std::size_t f = 0; f < y.size(); ++f) {
        header.push_back("y" + std::to_string(f < floors.size() ? floors[f] : f + 1));
        cols.emplace_back(y[f].data(), y[f].data() + y[f].size());
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    csv::write_columns(out, header, cols);
    std::cout << "predicted " << n << " points for " << y.size() << " floor(s); inference time " << sec << " s\n";
}

void cmd_experiment(const RunConfig& cfg, const std::string& name, const fs::path& out, bool paper_scale)
{
    ExperimentConfig ec = cfg.experiment_config();
    if (paper_scale) ec.apply_paper_scale();
    const ExperimentReport r = run_experiment(name, ec);
    write_report(r, out);
    std::cout << r.summary.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multiscale DeepONet workbench for seismic building response"};
    app.footer(formats_help);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "INI configuration file");
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s, g.seed_set = true; },
                                           "RNG seed (overrides [run] seed)");
    app.add_option("--threads", g.threads, "concurrent experiment arms (1 = bit-reproducible)");

    std::string out, in, checkpoint, record, name;
    std::size_t points = 0, count = 0, factor = 0, order = 0, epochs = 0;
    bool epochs_set = false, paper_scale = false;

    auto* gen = app.add_subcommand("generate", "generate a synthetic ground-motion ensemble");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "number of records");

    auto* pre = app.add_subcommand("preprocess", "anti-alias filter and decimate records");
    pre->add_option("--in", in, "record directory")->required();
    pre->add_option("--out", out, "output directory")->required();
    pre->add_option("--factor", factor, "decimation factor L");
    pre->add_option("--order", order, "Butterworth order");

    auto* bds = app.add_subcommand("build-dataset", "solve responses and write an operator dataset");
    bds->add_option("--in", in, "record directory")->required();
    bds->add_option("--out", out, "output directory")->required();

    auto* trn = app.add_subcommand("train", "train a model on a dataset or record directory");
    trn->add_option("--data", in, "dataset or record directory")->required();
    trn->add_option("--out", out, "output directory")->required();
    trn->add_option_function<std::size_t>("--epochs", [&](std::size_t e) { epochs = e, epochs_set = true; },
                                          "override training epochs");

    auto* prd = app.add_subcommand("predict", "predict floor displacements for one record");
    prd->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
    prd->add_option("--record", record, "record CSV (time,acceleration)")->required();
    prd->add_option("--out", out, "output CSV")->required();
    prd->add_option("--points", points, "query points spanning the record (default: record grid)");

    auto* exp = app.add_subcommand("experiment", "run a comparison study");
    exp->add_option("name", name, "scale-spacing | structures | amplitude-separation | multifloor | pipeline")->required();
    exp->add_option("--out", out, "report directory")->required();
    exp->add_flag("--paper-scale", paper_scale, "use the reference model sizes and epoch counts");

    auto* cfg_cmd = app.add_subcommand("config", "print the effective configuration as INI");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        RunConfig cfg = resolve_config(g);
        if (count > 0) cfg.record_count = count;
        if (factor > 0) cfg.downsample_factor = factor;
        if (order > 0) cfg.filter_order = static_cast<int>(order);
        if (epochs_set) cfg.training.epochs = epochs;

        if (*gen) cmd_generate(cfg, out);
        else if (*pre) cmd_preprocess(cfg, in, out);
        else if (*bds) cmd_build_dataset(cfg, in, out);
        else if (*trn) cmd_train(cfg, in, out);
        else if (*prd) cmd_predict(checkpoint, record, out, points);
        else if (*exp) {
            const auto& names = experiment_names();
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                std::string valid;
                for (const auto& n : names) valid += "\n  " + n;
                std::cerr << "error: unknown experiment '" << name << "'; valid names:" << valid << '\n';
                return exit_config;
            }
            cmd_experiment(cfg, name, out, paper_scale);
        } else if (*cfg_cmd) std::cout << dump_run_config(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return 0;
}
