// Command-line harness: train models, run the benchmark grid, sweep Wachter
// hyperparameters, re-render result files, and debug single explanations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cxbench/errors.hpp"
#include "cxbench/explain.hpp"
#include "cxbench/harness.hpp"
#include "cxbench/impute.hpp"
#include "cxbench/metrics.hpp"
#include "cxbench/milo.hpp"
#include "cxbench/rng.hpp"

namespace {

using namespace cxbench;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw error(errc::missing_file, "cannot write " + path);
    out << text;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    BenchConfig cfg = load_bench_config(config_path);
    const std::string dir = out_dir.empty() ? (cfg.output_dir.empty() ? "." : cfg.output_dir)
                                            : out_dir;
    std::filesystem::create_directories(dir);
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
        const DatasetSpec& spec = cfg.datasets[d];
        Dataset full = spec.csv.empty()
                           ? synth_blobs(spec.synth_rows, spec.synth_features,
                                         spec.synth_separation,
                                         derive_seed({cfg.master_seed, fnv1a("synth"), d}))
                           : ingest_csv(spec.csv, spec.target, spec.threshold);
        Split sp = split(full, derive_seed({cfg.master_seed, fnv1a("split"), d}));
        TrainConfig tc = cfg.model;
        tc.seed = derive_seed({cfg.master_seed, fnv1a("train"), d});
        Classifier clf = train(sp.train, tc);
        const std::string path = dir + "/" + spec.name + ".model.json";
        save(clf, path);
        std::cout << spec.name << ": train acc " << format_double(accuracy(clf, sp.train))
                  << ", test acc " << format_double(accuracy(clf, sp.test)) << " -> " << path
                  << "\n";
    }
    return kExitOk;
}

int cmd_bench(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
              const std::string& out_dir, std::size_t jobs) {
    BenchConfig cfg = load_bench_config(config_path);
    if (has_seed)
        cfg.master_seed = seed_override;
    if (!out_dir.empty())
        cfg.output_dir = out_dir;
    if (jobs > 0)
        cfg.jobs = jobs;
    const std::vector<ReportRow> rows = run_bench(cfg);
    std::cout << rows.size() << " rows";
    if (!cfg.output_dir.empty())
        std::cout << " -> " << cfg.output_dir << "/results.csv";
    std::cout << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path, std::size_t jobs) {
    SweepConfig cfg = load_sweep_config(config_path);
    if (jobs > 0)
        cfg.jobs = jobs;
    const std::vector<SweepCell> cells = sweep_wachter(cfg);
    const std::string csv = sweep_to_csv(cfg, cells);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        std::cout << cells.size() << " cells -> " << out_path << "\n";
    }
    return kExitOk;
}

int cmd_report(const std::string& rows_path, const std::string& format_name,
               const std::string& out_path) {
    ReportFormat format;
    if (!parse_report_format(format_name, format))
        throw error(errc::bad_config, "unknown report format: " + format_name);
    const std::vector<ReportRow> rows = read_rows_csv(rows_path);
    const std::string text = render_report(rows, format);
    if (out_path.empty())
        std::cout << text;
    else
        write_text(out_path, text);
    return kExitOk;
}

IncompleteInstance parse_instance(const std::string& text) {
    IncompleteInstance obs;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell == "*" || cell == "?" || cell == "nan")
            obs.values.push_back(IncompleteInstance::missing_value());
        else
            obs.values.push_back(std::stod(cell));
    }
    if (obs.values.empty())
        throw error(errc::bad_config, "empty instance");
    return obs;
}

int cmd_explain(const std::string& model_path, const std::string& instance_text,
                const std::string& method_name_str, const std::string& imputer_name_str,
                const std::string& data_csv, const std::string& target_col, int target_class,
                std::uint64_t seed, const std::string& dump_milo) {
    Method method;
    if (!parse_method(method_name_str, method))
        throw error(errc::bad_config, "unknown method: " + method_name_str);
    ImputerKind imp_kind;
    if (!parse_imputer(imputer_name_str, imp_kind))
        throw error(errc::bad_config, "unknown imputer: " + imputer_name_str);

    const Classifier clf = load(model_path);
    IncompleteInstance obs = parse_instance(instance_text);
    if (obs.values.size() != clf.n_in)
        throw error(errc::dimension_mismatch, "instance has " +
                                                  std::to_string(obs.values.size()) +
                                                  " features, model expects " +
                                                  std::to_string(clf.n_in));

    const bool needs_data = method == Method::bls || method == Method::kdtreennce ||
                            method == Method::rnce || method == Method::proplace ||
                            method == Method::stce || !obs.complete();
    Dataset train_ds;
    if (needs_data) {
        if (data_csv.empty())
            throw error(errc::bad_config,
                        "--data is required for imputation and training-data methods");
        Dataset full = ingest_csv(data_csv, target_col, 0.5);
        if (full.cols != clf.n_in)
            throw error(errc::dimension_mismatch, "data CSV does not match model input width");
        train_ds = split(full, derive_seed({seed, fnv1a("split"), std::uint64_t{0}})).train;
    }

    MethodSettings ms;
    Instance x_hat = obs.values;
    std::vector<Instance> completions;
    if (!obs.complete()) {
        Imputer imputer = Imputer::fit(method == Method::armin ? ImputerKind::mice : imp_kind,
                                       train_ds, ImputerParams{});
        if (method == Method::armin) {
            completions = imputer.impute_multi(obs, ms.armin_draws, seed);
            x_hat = completions.front();
        } else {
            x_hat = imputer.impute(obs).x;
        }
    } else if (method == Method::armin) {
        completions = {obs.values};
    }

    const int t = target_class >= 0 ? target_class : 1 - clf.predict_class(x_hat);
    const Box box = unit_box(clf.n_in);

    if (!dump_milo.empty()) {
        MiloProblem prob;
        prob.clf = &clf;
        prob.completions = method == Method::armin ? completions : std::vector<Instance>{x_hat};
        prob.target = t;
        prob.margin = ms.theta;
        prob.box = box;
        write_text(dump_milo, lp_text(encode(prob)));
    }

    Explanation ex;
    switch (method) {
    case Method::wachter:
        ex = wachter(clf, x_hat, t, ms.wachter, box);
        break;
    case Method::bls:
        ex = bls(clf, train_ds, x_hat, t, seed, ms.theta);
        break;
    case Method::kdtreennce: {
        NnceFilter f;
        ex = nnce(clf, train_ds, x_hat, t, f);
        break;
    }
    case Method::mce: {
        MiloMode mode;
        ex = milo_explain(clf, x_hat, t, mode, box);
        break;
    }
    case Method::armin: {
        MiloMode mode;
        mode.kind = MiloMode::Kind::armin;
        mode.completions = completions;
        ex = milo_explain(clf, x_hat, t, mode, box);
        break;
    }
    case Method::mcer: {
        MiloMode mode;
        mode.kind = MiloMode::Kind::mcer;
        mode.radius = ms.radius;
        ex = milo_explain(clf, x_hat, t, mode, box);
        break;
    }
    case Method::rnce: {
        NnceFilter f;
        f.kind = NnceFilter::Kind::certified;
        f.radius = ms.radius;
        ex = nnce(clf, train_ds, x_hat, t, f);
        break;
    }
    case Method::proplace:
        ex = proplace(clf, train_ds, x_hat, t, ms.radius, ms.proplace_k, box);
        break;
    case Method::stce: {
        NnceFilter f;
        f.kind = NnceFilter::Kind::stable;
        f.stability = ms.stability;
        f.seed = seed;
        ex = nnce(clf, train_ds, x_hat, t, f);
        break;
    }
    case Method::apas: {
        ModelSet models = sample_models(clf, ms.apas_models, ms.radius, seed);
        ex = apas(clf, x_hat, t, models, ms.wachter, box);
        break;
    }
    }

    nlohmann::json out;
    out["method"] = method_name(method);
    out["status"] = status_name(ex.status);
    out["target"] = ex.target;
    out["x_hat"] = x_hat;
    out["x_prime"] = ex.x_prime;
    out["delta"] = ex.delta;
    const Prediction pred = predict(clf, ex.x_prime);
    out["prediction"] = pred.label;
    out["score"] = pred.score;
    out["solve_ms"] = ex.solve_ms;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual explanation benchmark for incomplete tabular inputs"};
    app.require_subcommand(1);

    std::string config_path, out_path, rows_path, format_name = "markdown";
    std::string model_path, instance_text, method_str = "mce", imputer_str = "knn";
    std::string data_csv, target_col, dump_milo;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::size_t jobs = 0;
    int target_class = -1;

    auto* tr = app.add_subcommand("train", "train and save one classifier per dataset");
    tr->add_option("config", config_path, "bench config JSON")->required();
    tr->add_option("--out", out_path, "output directory");

    auto* be = app.add_subcommand("bench", "run the full evaluation grid");
    be->add_option("config", config_path, "bench config JSON")->required();
    be->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        has_seed = true;
    });
    be->add_option("--out", out_path, "output directory override");
    be->add_option("--jobs", jobs, "worker threads");

    auto* sw = app.add_subcommand("sweep", "Wachter hyperparameter sweep");
    sw->add_option("config", config_path, "sweep config JSON")->required();
    sw->add_option("--out", out_path, "heatmap CSV path");
    sw->add_option("--jobs", jobs, "worker threads");

    auto* re = app.add_subcommand("report", "render a results CSV");
    re->add_option("rows", rows_path, "results CSV")->required();
    re->add_option("--format", format_name, "markdown | csv | json");
    re->add_option("--out", out_path, "output file (stdout when omitted)");

    auto* ex = app.add_subcommand("explain", "explain a single instance");
    ex->add_option("model", model_path, "model JSON file")->required();
    ex->add_option("instance", instance_text, "comma-separated values, * for missing")
        ->required();
    ex->add_option("--method", method_str, "explanation method");
    ex->add_option("--impute", imputer_str, "imputer for missing values");
    ex->add_option("--data", data_csv, "training CSV (for imputers and data-backed methods)");
    ex->add_option("--target", target_col, "target column of --data");
    ex->add_option("--target-class", target_class, "desired class (default: flip prediction)");
    ex->add_option("--seed", seed, "seed");
    ex->add_option("--dump-milo", dump_milo, "write the MILO model in LP text format");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (tr->parsed())
            return cmd_train(config_path, out_path);
        if (be->parsed())
            return cmd_bench(config_path, seed, has_seed, out_path, jobs);
        if (sw->parsed())
            return cmd_sweep(config_path, out_path, jobs);
        if (re->parsed())
            return cmd_report(rows_path, format_name, out_path);
        if (ex->parsed())
            return cmd_explain(model_path, instance_text, method_str, imputer_str, data_csv,
                               target_col, target_class, seed, dump_milo);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_data_error(e.code()) ? kExitData : kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
