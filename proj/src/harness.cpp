#include "cxbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cxbench/errors.hpp"
#include "cxbench/metrics.hpp"
#include "cxbench/rng.hpp"
#include "cxbench/robustness.hpp"

namespace cxbench {

using nlohmann::json;

const char* imputer_name(ImputerKind k) {
    switch (k) {
    case ImputerKind::simple: return "simple";
    case ImputerKind::knn: return "knn";
    case ImputerKind::mice: return "mice";
    }
    return "unknown";
}

bool parse_imputer(const std::string& name, ImputerKind& out) {
    if (name == "simple" || name == "mean") {
        out = ImputerKind::simple;
        return true;
    }
    if (name == "knn") {
        out = ImputerKind::knn;
        return true;
    }
    if (name == "mice") {
        out = ImputerKind::mice;
        return true;
    }
    return false;
}

std::vector<std::pair<Method, MethodSettings>> default_method_roster() {
    std::vector<std::pair<Method, MethodSettings>> out;
    for (Method m : {Method::wachter, Method::bls, Method::kdtreennce, Method::mce, Method::armin,
                     Method::mcer, Method::rnce, Method::proplace, Method::stce, Method::apas}) {
        MethodSettings s;
        if (m == Method::apas) {
            // Validity-first descent: the sampled-ensemble method keeps the
            // worst member past the margin rather than trading it off against
            // proximity, so it converges instead of stalling at the anchor.
            s.wachter.lambda = 0.0;
            s.wachter.lr = 0.05;
        }
        out.emplace_back(m, s);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw error(errc::bad_argument, "format_double failed");
    return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void config_fail(const std::string& msg) {
    throw error(errc::bad_config, "config: " + msg);
}

DatasetSpec parse_dataset_spec(const json& j) {
    DatasetSpec spec;
    if (!j.is_object() || !j.contains("name"))
        config_fail("each dataset needs a name");
    spec.name = j.at("name").get<std::string>();
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        spec.synth_rows = s.value("rows", spec.synth_rows);
        spec.synth_features = s.value("features", spec.synth_features);
        spec.synth_separation = s.value("separation", spec.synth_separation);
    } else {
        if (!j.contains("csv") || !j.contains("target"))
            config_fail("dataset " + spec.name + " needs csv+target or synth");
        spec.csv = j.at("csv").get<std::string>();
        spec.target = j.at("target").get<std::string>();
        spec.threshold = j.value("threshold", spec.threshold);
    }
    return spec;
}

MethodSettings parse_method_settings(const json& j, MethodSettings base) {
    MethodSettings s = base;
    if (!j.is_object())
        return s;
    s.wachter.lambda = j.value("lambda", s.wachter.lambda);
    s.wachter.eps = j.value("eps", s.wachter.eps);
    s.wachter.lr = j.value("lr", s.wachter.lr);
    s.wachter.max_iter = j.value("max_iter", s.wachter.max_iter);
    s.theta = j.value("theta", s.theta);
    s.radius = j.value("radius", s.radius);
    s.theta_max = j.value("theta_max", s.theta_max);
    s.theta_tol = j.value("theta_tol", s.theta_tol);
    s.armin_draws = j.value("draws", s.armin_draws);
    s.proplace_k = j.value("k", s.proplace_k);
    s.proplace_steps = j.value("steps", s.proplace_steps);
    s.proplace_step = j.value("step_size", s.proplace_step);
    s.apas_models = j.value("models", s.apas_models);
    s.stce_ensemble = j.value("ensemble", s.stce_ensemble);
    if (j.contains("filter")) {
        const std::string f = j.at("filter").get<std::string>();
        if (f == "stable")
            s.stce_stable = true;
        else if (f == "ensemble")
            s.stce_stable = false;
        else
            config_fail("unknown stce filter: " + f);
    }
    s.stability.noise_std = j.value("sigma", s.stability.noise_std);
    s.stability.samples = j.value("samples", s.stability.samples);
    s.stability.k_weight = j.value("k_weight", s.stability.k_weight);
    s.stability.tau = j.value("tau", s.stability.tau);
    return s;
}

std::vector<std::pair<Method, MethodSettings>> parse_methods(const json& j) {
    std::vector<std::pair<Method, MethodSettings>> out;
    auto add = [&](const std::string& name, const json& params) {
        Method m;
        if (!parse_method(name, m))
            config_fail("unknown method: " + name);
        out.emplace_back(m, parse_method_settings(params, MethodSettings{}));
    };
    if (j.is_array()) {
        for (const auto& item : j) {
            if (item.is_string())
                add(item.get<std::string>(), json::object());
            else if (item.is_object() && item.contains("name"))
                add(item.at("name").get<std::string>(), item);
            else
                config_fail("method entries must be a name or an object with a name");
        }
    } else if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            add(it.key(), it.value());
    } else {
        config_fail("methods must be an array or an object");
    }
    if (out.empty())
        config_fail("no methods configured");
    return out;
}

TrainConfig parse_train_config(const json& j, TrainConfig base) {
    TrainConfig t = base;
    if (!j.is_object())
        return t;
    t.hidden_width = j.value("hidden_width", t.hidden_width);
    t.epochs = j.value("epochs", t.epochs);
    t.step_size = j.value("step_size", t.step_size);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.seed = j.value("seed", t.seed);
    return t;
}

ImputerParams parse_imputer_params(const json& j, ImputerParams base) {
    ImputerParams p = base;
    if (!j.is_object())
        return p;
    p.knn_k = j.value("knn_k", p.knn_k);
    p.mice_max_iter = j.value("mice_max_iter", p.mice_max_iter);
    p.mice_tol = j.value("mice_tol", p.mice_tol);
    return p;
}

json dataset_spec_to_json(const DatasetSpec& s) {
    json j;
    j["name"] = s.name;
    if (s.csv.empty()) {
        j["synth"] = {{"rows", s.synth_rows},
                      {"features", s.synth_features},
                      {"separation", s.synth_separation}};
    } else {
        j["csv"] = s.csv;
        j["target"] = s.target;
        j["threshold"] = s.threshold;
    }
    return j;
}

json method_settings_to_json(const MethodSettings& s) {
    return json{{"lambda", s.wachter.lambda},
                {"eps", s.wachter.eps},
                {"lr", s.wachter.lr},
                {"max_iter", s.wachter.max_iter},
                {"theta", s.theta},
                {"radius", s.radius},
                {"theta_max", s.theta_max},
                {"theta_tol", s.theta_tol},
                {"draws", s.armin_draws},
                {"k", s.proplace_k},
                {"steps", s.proplace_steps},
                {"step_size", s.proplace_step},
                {"models", s.apas_models},
                {"ensemble", s.stce_ensemble},
                {"filter", s.stce_stable ? "stable" : "ensemble"},
                {"sigma", s.stability.noise_std},
                {"samples", s.stability.samples},
                {"k_weight", s.stability.k_weight},
                {"tau", s.stability.tau}};
}

json bench_config_to_json(const BenchConfig& cfg) {
    json j;
    json ds = json::array();
    for (const auto& d : cfg.datasets)
        ds.push_back(dataset_spec_to_json(d));
    j["datasets"] = ds;
    j["n_batch"] = cfg.n_batch;
    j["m_values"] = cfg.m_values;
    json imps = json::array();
    for (ImputerKind k : cfg.imputers)
        imps.push_back(imputer_name(k));
    j["imputers"] = imps;
    json methods = json::array();
    for (const auto& [m, s] : cfg.methods) {
        json entry = method_settings_to_json(s);
        entry["name"] = method_name(m);
        methods.push_back(entry);
    }
    j["methods"] = methods;
    j["armin_mice_only"] = cfg.armin_mice_only;
    j["model"] = {{"hidden_width", cfg.model.hidden_width},
                  {"epochs", cfg.model.epochs},
                  {"step_size", cfg.model.step_size},
                  {"batch_size", cfg.model.batch_size},
                  {"seed", cfg.model.seed}};
    j["seeds"] = {{"master", cfg.master_seed}, {"repetitions", cfg.repetitions}};
    j["output_dir"] = cfg.output_dir;
    j["imputer"] = {{"knn_k", cfg.imputer_params.knn_k},
                    {"mice_max_iter", cfg.imputer_params.mice_max_iter},
                    {"mice_tol", cfg.imputer_params.mice_tol}};
    j["lof_k"] = cfg.lof_k;
    j["jobs"] = cfg.jobs;
    j["wall_timing"] = cfg.wall_timing;
    return j;
}

json parse_json_text(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        config_fail(std::string("cannot parse ") + what + ": " + e.what());
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw error(errc::missing_file, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

BenchConfig parse_bench_config_text(const std::string& json_text) {
    const json j = parse_json_text(json_text, "bench config");
    BenchConfig cfg;
    if (!j.contains("datasets") || !j.at("datasets").is_array() || j.at("datasets").empty())
        config_fail("at least one dataset required");
    for (const auto& d : j.at("datasets"))
        cfg.datasets.push_back(parse_dataset_spec(d));

    cfg.n_batch = j.value("n_batch", cfg.n_batch);
    if (cfg.n_batch < 1)
        config_fail("n_batch must be >= 1");
    if (j.contains("m_values"))
        cfg.m_values = j.at("m_values").get<std::vector<std::size_t>>();
    if (cfg.m_values.empty())
        config_fail("m_values must be non-empty");

    if (j.contains("imputers")) {
        cfg.imputers.clear();
        for (const auto& name : j.at("imputers")) {
            ImputerKind k;
            if (!parse_imputer(name.get<std::string>(), k))
                config_fail("unknown imputer: " + name.get<std::string>());
            cfg.imputers.push_back(k);
        }
        if (cfg.imputers.empty())
            config_fail("imputers must be non-empty");
    }

    cfg.methods = j.contains("methods") ? parse_methods(j.at("methods")) : default_method_roster();
    cfg.armin_mice_only = j.value("armin_mice_only", cfg.armin_mice_only);
    if (j.contains("model"))
        cfg.model = parse_train_config(j.at("model"), cfg.model);
    if (j.contains("seeds")) {
        cfg.master_seed = j.at("seeds").value("master", cfg.master_seed);
        cfg.repetitions = j.at("seeds").value("repetitions", cfg.repetitions);
    }
    if (cfg.repetitions < 1)
        config_fail("repetitions must be >= 1");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (j.contains("imputer"))
        cfg.imputer_params = parse_imputer_params(j.at("imputer"), cfg.imputer_params);
    cfg.lof_k = j.value("lof_k", cfg.lof_k);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.wall_timing = j.value("wall_timing", cfg.wall_timing);
    return cfg;
}

BenchConfig load_bench_config(const std::string& path) {
    try {
        return parse_bench_config_text(slurp(path));
    } catch (const error& e) {
        if (e.code() == errc::missing_file)
            throw error(errc::bad_config, e.what());
        throw;
    }
}

// ---------------------------------------------------------------------------
// Bench execution

namespace {

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n_threads = std::min(jobs, count);
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
        threads.emplace_back(work);
    for (auto& t : threads)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

struct Prep {
    Dataset train;
    Dataset test;
    Classifier clf;
    std::vector<Instance> x_true;
    std::vector<int> targets;
    std::vector<std::vector<IncompleteInstance>> masked;          // [m_index][i]
    std::vector<Imputer> imputers;                                // [imp_index]
    std::vector<std::vector<std::vector<Instance>>> x_hat;        // [m_index][imp_index][i]
    std::vector<std::vector<std::vector<Instance>>> armin_completions; // [m_index][i][draw]
    std::unique_ptr<LocalOutlierFactor> lof;
    std::optional<ModelSet> apas_set;
    std::optional<ModelSet> stce_set;
    std::size_t clip_count = 0;
};

const MethodSettings* find_settings(const BenchConfig& cfg, Method m) {
    for (const auto& [method, settings] : cfg.methods)
        if (method == m)
            return &settings;
    return nullptr;
}

Prep build_prep(const BenchConfig& cfg, std::size_t d_index, std::uint64_t master_rep) {
    const DatasetSpec& spec = cfg.datasets[d_index];
    Prep prep;

    Dataset full = spec.csv.empty()
                       ? synth_blobs(spec.synth_rows, spec.synth_features, spec.synth_separation,
                                     derive_seed({master_rep, fnv1a("synth"), d_index}))
                       : ingest_csv(spec.csv, spec.target, spec.threshold);
    for (std::size_t m : cfg.m_values)
        if (m > full.cols)
            config_fail("m=" + std::to_string(m) + " exceeds feature count of " + spec.name);

    Split sp = split(full, derive_seed({master_rep, fnv1a("split"), d_index}));
    prep.train = std::move(sp.train);
    prep.test = std::move(sp.test);

    TrainConfig tc = cfg.model;
    tc.seed = derive_seed({master_rep, fnv1a("train"), d_index});
    prep.clf = train(prep.train, tc);

    auto rng = make_rng(derive_seed({master_rep, fnv1a("batch"), d_index}));
    std::vector<std::size_t> batch_idx;
    if (prep.test.rows >= cfg.n_batch) {
        std::vector<std::size_t> idx(prep.test.rows);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        batch_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.n_batch));
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, prep.test.rows - 1);
        for (std::size_t i = 0; i < cfg.n_batch; ++i)
            batch_idx.push_back(pick(rng));
    }
    prep.x_true.reserve(cfg.n_batch);
    prep.targets.reserve(cfg.n_batch);
    for (std::size_t idx : batch_idx) {
        Instance x = prep.test.instance(idx);
        const int c = prep.clf.predict_class(x);
        prep.targets.push_back(1 - c);
        prep.x_true.push_back(std::move(x));
    }

    prep.masked.resize(cfg.m_values.size());
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
        const std::size_t m = cfg.m_values[mi];
        const std::uint64_t base = derive_seed({master_rep, fnv1a("mask"), d_index, m});
        prep.masked[mi].reserve(cfg.n_batch);
        for (std::size_t i = 0; i < cfg.n_batch; ++i)
            prep.masked[mi].push_back(mask_mcar(prep.x_true[i], MaskSpec{m, base ^ i}));
    }

    prep.imputers.reserve(cfg.imputers.size());
    for (ImputerKind kind : cfg.imputers)
        prep.imputers.push_back(Imputer::fit(kind, prep.train, cfg.imputer_params));

    prep.x_hat.assign(cfg.m_values.size(), {});
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
        prep.x_hat[mi].resize(cfg.imputers.size());
        for (std::size_t ii = 0; ii < cfg.imputers.size(); ++ii) {
            prep.x_hat[mi][ii].reserve(cfg.n_batch);
            for (std::size_t i = 0; i < cfg.n_batch; ++i)
                prep.x_hat[mi][ii].push_back(prep.imputers[ii].impute(prep.masked[mi][i]).x);
        }
    }

    if (const MethodSettings* armin = find_settings(cfg, Method::armin)) {
        std::ptrdiff_t mice_index = -1;
        for (std::size_t ii = 0; ii < cfg.imputers.size(); ++ii)
            if (cfg.imputers[ii] == ImputerKind::mice)
                mice_index = static_cast<std::ptrdiff_t>(ii);
        if (mice_index >= 0) {
            const Imputer& mice = prep.imputers[static_cast<std::size_t>(mice_index)];
            prep.armin_completions.resize(cfg.m_values.size());
            for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
                const std::uint64_t base =
                    derive_seed({master_rep, fnv1a("armin"), d_index, cfg.m_values[mi]});
                prep.armin_completions[mi].reserve(cfg.n_batch);
                for (std::size_t i = 0; i < cfg.n_batch; ++i)
                    prep.armin_completions[mi].push_back(
                        mice.impute_multi(prep.masked[mi][i], armin->armin_draws, base ^ i));
            }
        }
    }

    prep.lof = std::make_unique<LocalOutlierFactor>(
        prep.train, std::min(cfg.lof_k, prep.train.rows - 1));

    if (const MethodSettings* s = find_settings(cfg, Method::apas))
        prep.apas_set = sample_models(prep.clf, s->apas_models, s->radius,
                                      derive_seed({master_rep, fnv1a("apas"), d_index}));
    if (const MethodSettings* s = find_settings(cfg, Method::stce); s && !s->stce_stable) {
        TrainConfig stc = cfg.model;
        stc.seed = derive_seed({master_rep, fnv1a("stce-train"), d_index});
        prep.stce_set = retrain_ensemble(prep.train, stc, s->stce_ensemble,
                                         derive_seed({master_rep, fnv1a("stce-boot"), d_index}));
    }
    return prep;
}

struct CellTask {
    std::size_t row_index;
    std::size_t d_index, rep, m_index, imp_index, meth_index;
};

Explanation run_method(const BenchConfig& cfg, const Prep& prep, const CellTask& task,
                       std::size_t i, std::uint64_t inst_seed, const Box& box) {
    const auto& [method, ms] = cfg.methods[task.meth_index];
    const Instance& x_hat = prep.x_hat[task.m_index][task.imp_index][i];
    const int t = prep.targets[i];
    const Classifier& clf = prep.clf;

    switch (method) {
    case Method::wachter:
        return wachter(clf, x_hat, t, ms.wachter, box);
    case Method::bls:
        return bls(clf, prep.train, x_hat, t, inst_seed, ms.theta);
    case Method::kdtreennce: {
        NnceFilter f;
        f.kind = NnceFilter::Kind::none;
        return nnce(clf, prep.train, x_hat, t, f);
    }
    case Method::mce: {
        MiloMode mode;
        mode.kind = MiloMode::Kind::mce;
        mode.theta = ms.theta;
        return milo_explain(clf, x_hat, t, mode, box);
    }
    case Method::armin: {
        MiloMode mode;
        mode.kind = MiloMode::Kind::armin;
        mode.theta = ms.theta;
        mode.completions = prep.armin_completions[task.m_index][i];
        return milo_explain(clf, x_hat, t, mode, box);
    }
    case Method::mcer: {
        MiloMode mode;
        mode.kind = MiloMode::Kind::mcer;
        mode.theta = ms.theta;
        mode.radius = ms.radius;
        mode.theta_max = ms.theta_max;
        mode.theta_tol = ms.theta_tol;
        return milo_explain(clf, x_hat, t, mode, box);
    }
    case Method::rnce: {
        NnceFilter f;
        f.kind = NnceFilter::Kind::certified;
        f.radius = ms.radius;
        return nnce(clf, prep.train, x_hat, t, f);
    }
    case Method::proplace:
        return proplace(clf, prep.train, x_hat, t, ms.radius, ms.proplace_k, box,
                        ms.proplace_steps, ms.proplace_step);
    case Method::stce: {
        NnceFilter f;
        if (ms.stce_stable) {
            f.kind = NnceFilter::Kind::stable;
            f.stability = ms.stability;
            f.seed = inst_seed;
        } else {
            f.kind = NnceFilter::Kind::ensemble;
            f.models = &*prep.stce_set;
        }
        return nnce(clf, prep.train, x_hat, t, f);
    }
    case Method::apas:
        return apas(clf, x_hat, t, *prep.apas_set, ms.wachter, box);
    }
    throw error(errc::bad_argument, "run_method: unknown method");
}

ReportRow run_cell(const BenchConfig& cfg, const Prep& prep, const CellTask& task,
                   std::uint64_t master_rep, std::mutex& observer_mu, std::size_t* clip_total) {
    const auto start = std::chrono::steady_clock::now();
    const auto& [method, ms] = cfg.methods[task.meth_index];
    const std::size_t m = cfg.m_values[task.m_index];
    const ImputerKind imputer = cfg.imputers[task.imp_index];
    const std::uint64_t cell_seed = derive_seed(
        {master_rep, fnv1a("cell"), task.d_index, m, task.imp_index, task.meth_index});
    const Box box = unit_box(prep.clf.n_in);

    CellInfo info{cfg.datasets[task.d_index].name, method, imputer, m, master_rep};

    std::vector<Explanation> explanations;
    explanations.reserve(cfg.n_batch);
    for (std::size_t i = 0; i < cfg.n_batch; ++i) {
        const std::uint64_t inst_seed = cell_seed ^ i;
        Explanation ex;
        try {
            ex = run_method(cfg, prep, task, i, inst_seed, box);
        } catch (const std::exception&) {
            // A per-instance failure is recorded, never aborts the run.
            const Instance& x_hat = prep.x_hat[task.m_index][task.imp_index][i];
            ex.x_prime = x_hat;
            ex.delta.assign(x_hat.size(), 0.0);
            ex.target = prep.targets[i];
            ex.method = method;
            ex.status = ExplainStatus::infeasible;
        }
        if (cfg.observer) {
            std::lock_guard<std::mutex> lock(observer_mu);
            cfg.observer(info, prep.x_true[i], prep.x_hat[task.m_index][task.imp_index][i], ex);
        }
        explanations.push_back(std::move(ex));
    }

    ReportRow row;
    row.dataset = info.dataset;
    row.method = method_name(method);
    row.imputer = imputer_name(imputer);
    row.m = m;
    row.seed = master_rep;
    row.vcx = vcx(prep.clf, explanations, prep.targets);
    std::size_t clipped = 0;
    row.vrc = vrc(prep.clf, prep.x_true, explanations, prep.targets, &clipped);
    if (clip_total)
        *clip_total += clipped;

    std::vector<Explanation> produced;
    std::vector<Instance> produced_true;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        switch (explanations[i].status) {
        case ExplainStatus::infeasible:
            ++row.n_infeasible;
            break;
        case ExplainStatus::not_converged:
            ++row.n_not_converged;
            [[fallthrough]];
        case ExplainStatus::valid:
            produced.push_back(explanations[i]);
            produced_true.push_back(prep.x_true[i]);
            break;
        }
    }
    if (!produced.empty()) {
        std::tie(row.cost_mean, row.cost_std) = cost(produced_true, produced);
        std::vector<double> lofs(produced.size());
        for (std::size_t i = 0; i < produced.size(); ++i)
            lofs[i] = prep.lof->score(produced[i].x_prime);
        double mean = 0.0;
        for (double v : lofs)
            mean += v;
        mean /= static_cast<double>(lofs.size());
        double var = 0.0;
        for (double v : lofs)
            var += (v - mean) * (v - mean);
        var /= static_cast<double>(lofs.size());
        row.lof_mean = mean;
        row.lof_std = std::sqrt(var);
    }
    if (cfg.wall_timing)
        row.runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
    return row;
}

} // namespace

std::vector<ReportRow> run_bench(const BenchConfig& cfg) {
    if (cfg.datasets.empty())
        config_fail("no datasets configured");
    if (cfg.methods.empty())
        config_fail("no methods configured");
    if (cfg.n_batch < 1)
        config_fail("n_batch must be >= 1");

    // Row slots in deterministic order; cells fill them in any schedule.
    std::vector<CellTask> tasks;
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep)
            for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi)
                for (std::size_t ii = 0; ii < cfg.imputers.size(); ++ii)
                    for (std::size_t ki = 0; ki < cfg.methods.size(); ++ki) {
                        if (cfg.methods[ki].first == Method::armin && cfg.armin_mice_only &&
                            cfg.imputers[ii] != ImputerKind::mice)
                            continue;
                        tasks.push_back({tasks.size(), d, rep, mi, ii, ki});
                    }

    std::vector<ReportRow> rows(tasks.size());
    std::mutex observer_mu;
    std::size_t clip_total = 0;
    std::mutex clip_mu;

    // Group tasks by (dataset, repetition) so the shared prep is built once.
    std::size_t cursor = 0;
    while (cursor < tasks.size()) {
        const std::size_t d = tasks[cursor].d_index;
        const std::size_t rep = tasks[cursor].rep;
        std::size_t end = cursor;
        while (end < tasks.size() && tasks[end].d_index == d && tasks[end].rep == rep)
            ++end;

        const std::uint64_t master_rep = cfg.master_seed + rep;
        Prep prep = build_prep(cfg, d, master_rep);

        parallel_for(end - cursor, cfg.jobs, [&](std::size_t k) {
            const CellTask& task = tasks[cursor + k];
            std::size_t clipped = 0;
            rows[task.row_index] = run_cell(cfg, prep, task, master_rep, observer_mu, &clipped);
            if (clipped > 0) {
                std::lock_guard<std::mutex> lock(clip_mu);
                clip_total += clipped;
            }
        });
        cursor = end;
    }

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        write_rows_csv(rows, cfg.output_dir + "/results.csv");
        json manifest = json::parse(bench_manifest(cfg, rows.size()));
        manifest["recourse_clipped_total"] = clip_total;
        std::ofstream out(cfg.output_dir + "/manifest.json");
        out << manifest.dump(2) << "\n";
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Row serialization

namespace {
constexpr const char* kCsvHeader =
    "dataset,method,imputer,m,seed,vrc,vcx,cost_mean,cost_std,lof_mean,lof_std,"
    "n_infeasible,n_not_converged,runtime_ms";
}

std::string rows_to_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.dataset << ',' << r.method << ',' << r.imputer << ',' << r.m << ',' << r.seed
            << ',' << format_double(r.vrc) << ',' << format_double(r.vcx) << ','
            << format_double(r.cost_mean) << ',' << format_double(r.cost_std) << ','
            << format_double(r.lof_mean) << ',' << format_double(r.lof_std) << ','
            << r.n_infeasible << ',' << r.n_not_converged << ',' << format_double(r.runtime_ms)
            << "\n";
    }
    return out.str();
}

void write_rows_csv(const std::vector<ReportRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw error(errc::missing_file, "cannot write " + path);
    out << rows_to_csv(rows);
}

std::vector<ReportRow> read_rows_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw error(errc::missing_file, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw error(errc::parse_error, "empty rows CSV: " + path);
    if (line != kCsvHeader)
        throw error(errc::parse_error, "unexpected rows CSV header in " + path);

    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 14)
            throw error(errc::parse_error, "bad row in " + path + ": " + line);
        ReportRow r;
        r.dataset = cells[0];
        r.method = cells[1];
        r.imputer = cells[2];
        r.m = std::stoull(cells[3]);
        r.seed = std::stoull(cells[4]);
        r.vrc = std::stod(cells[5]);
        r.vcx = std::stod(cells[6]);
        r.cost_mean = std::stod(cells[7]);
        r.cost_std = std::stod(cells[8]);
        r.lof_mean = std::stod(cells[9]);
        r.lof_std = std::stod(cells[10]);
        r.n_infeasible = std::stoull(cells[11]);
        r.n_not_converged = std::stoull(cells[12]);
        r.runtime_ms = std::stod(cells[13]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string bench_manifest(const BenchConfig& cfg, std::size_t row_count) {
    const json cfg_json = bench_config_to_json(cfg);
    const std::string canonical = cfg_json.dump();
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical)));
    json manifest;
    manifest["tool"] = "cxbench";
    manifest["version"] = "0.1.0";
    manifest["config"] = cfg_json;
    manifest["config_hash"] = hash_hex;
    manifest["master_seed"] = cfg.master_seed;
    manifest["repetitions"] = cfg.repetitions;
    manifest["row_count"] = row_count;
    return manifest.dump(2);
}

// ---------------------------------------------------------------------------
// Aggregation

AggregateResult aggregate(const std::vector<ReportRow>& rows, GroupBy group_by) {
    if (rows.empty())
        throw error(errc::bad_argument, "aggregate: no rows");

    auto group_of = [&](const ReportRow& r) -> std::string {
        switch (group_by) {
        case GroupBy::robustness: {
            Method m;
            if (!parse_method(r.method, m))
                throw error(errc::parse_error, "aggregate: unknown method " + r.method);
            return method_is_robust(m) ? "robust" : "non_robust";
        }
        case GroupBy::imputer:
            return r.imputer;
        case GroupBy::dataset:
            return r.dataset;
        }
        return {};
    };

    std::vector<std::size_t> ms;
    std::vector<std::string> groups;
    for (const auto& r : rows) {
        if (std::find(ms.begin(), ms.end(), r.m) == ms.end())
            ms.push_back(r.m);
        const std::string g = group_of(r);
        if (std::find(groups.begin(), groups.end(), g) == groups.end())
            groups.push_back(g);
    }
    std::sort(ms.begin(), ms.end());
    if (group_by == GroupBy::robustness) {
        groups = {"robust", "non_robust"};
    } else {
        std::sort(groups.begin(), groups.end());
    }

    AggregateResult out;
    auto values_of = [&](const std::string& g, std::size_t m) {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.m == m && group_of(r) == g)
                v.push_back(r.vrc);
        return v;
    };

    for (std::size_t m : ms) {
        for (const auto& g : groups) {
            std::vector<double> v = values_of(g, m);
            if (v.empty())
                continue;
            GroupSummary s;
            s.group = g;
            s.m = m;
            s.n = v.size();
            s.median = median(v);
            s.q1 = quantile(v, 0.25);
            s.q3 = quantile(v, 0.75);
            out.summaries.push_back(std::move(s));
        }
        for (std::size_t a = 0; a < groups.size(); ++a) {
            for (std::size_t b = a + 1; b < groups.size(); ++b) {
                std::vector<double> va = values_of(groups[a], m);
                std::vector<double> vb = values_of(groups[b], m);
                if (va.empty() || vb.empty())
                    continue;
                GroupComparison c;
                c.a = groups[a];
                c.b = groups[b];
                c.m = m;
                c.median_a = median(va);
                c.median_b = median(vb);
                const MwuResult mw = mann_whitney_u(va, vb);
                c.u = mw.u;
                c.p = mw.p_two_sided;
                out.comparisons.push_back(std::move(c));
            }
        }
    }
    return out;
}

std::string aggregate_to_text(const AggregateResult& agg) {
    std::ostringstream out;
    out << "group,m,n,median,q1,q3\n";
    for (const auto& s : agg.summaries)
        out << s.group << ',' << s.m << ',' << s.n << ',' << format_double(s.median) << ','
            << format_double(s.q1) << ',' << format_double(s.q3) << "\n";
    out << "\ncomparison,m,median_a,median_b,U,p\n";
    for (const auto& c : agg.comparisons)
        out << c.a << " vs " << c.b << ',' << c.m << ',' << format_double(c.median_a) << ','
            << format_double(c.median_b) << ',' << format_double(c.u) << ','
            << format_double(c.p) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Wachter sweep

std::vector<SweepCell> sweep_wachter(const SweepConfig& cfg) {
    if (cfg.grid_x.empty() || cfg.grid_y.empty())
        config_fail("sweep grids must be non-empty");
    if (cfg.axis_x != "lr" && cfg.axis_x != "eps")
        config_fail("sweep axis_x must be lr or eps");

    std::vector<SweepCell> cells(cfg.grid_x.size() * cfg.grid_y.size());
    parallel_for(cells.size(), cfg.jobs, [&](std::size_t k) {
        const double x = cfg.grid_x[k % cfg.grid_x.size()];
        const double y = cfg.grid_y[k / cfg.grid_x.size()];

        MethodSettings ms;
        ms.wachter = cfg.fixed;
        ms.wachter.lambda = y;
        if (cfg.axis_x == "lr")
            ms.wachter.lr = x;
        else
            ms.wachter.eps = x;

        BenchConfig bc;
        bc.datasets = {cfg.dataset};
        bc.n_batch = cfg.n_batch;
        bc.m_values = {cfg.m};
        bc.imputers = {cfg.imputer};
        bc.methods = {{Method::wachter, ms}};
        bc.model = cfg.model;
        bc.master_seed = cfg.seed;
        bc.imputer_params = cfg.imputer_params;
        bc.jobs = 1;
        const std::vector<ReportRow> rows = run_bench(bc);
        cells[k] = SweepCell{x, y, rows.at(0).vrc};
    });
    return cells;
}

std::string sweep_to_csv(const SweepConfig& cfg, const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << cfg.axis_x << ",lambda,vrc\n";
    for (const auto& c : cells)
        out << format_double(c.x) << ',' << format_double(c.y) << ',' << format_double(c.vrc)
            << "\n";
    return out.str();
}

SweepConfig load_sweep_config(const std::string& path) {
    std::string text;
    try {
        text = slurp(path);
    } catch (const error& e) {
        throw error(errc::bad_config, e.what());
    }
    const json j = parse_json_text(text, "sweep config");
    SweepConfig cfg;
    if (!j.contains("dataset"))
        config_fail("sweep config needs a dataset");
    cfg.dataset = parse_dataset_spec(j.at("dataset"));
    if (j.contains("model"))
        cfg.model = parse_train_config(j.at("model"), cfg.model);
    cfg.axis_x = j.value("axis_x", cfg.axis_x);
    if (j.contains("grid_x"))
        cfg.grid_x = j.at("grid_x").get<std::vector<double>>();
    if (j.contains("grid_y"))
        cfg.grid_y = j.at("grid_y").get<std::vector<double>>();
    if (j.contains("fixed")) {
        const auto& f = j.at("fixed");
        cfg.fixed.lambda = f.value("lambda", cfg.fixed.lambda);
        cfg.fixed.eps = f.value("eps", cfg.fixed.eps);
        cfg.fixed.lr = f.value("lr", cfg.fixed.lr);
        cfg.fixed.max_iter = f.value("max_iter", cfg.fixed.max_iter);
    }
    if (j.contains("imputer")) {
        ImputerKind k;
        if (!parse_imputer(j.at("imputer").get<std::string>(), k))
            config_fail("unknown imputer in sweep config");
        cfg.imputer = k;
    }
    cfg.m = j.value("m", cfg.m);
    cfg.n_batch = j.value("n_batch", cfg.n_batch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("imputer_params"))
        cfg.imputer_params = parse_imputer_params(j.at("imputer_params"), cfg.imputer_params);
    return cfg;
}

// ---------------------------------------------------------------------------
// Reports

bool parse_report_format(const std::string& name, ReportFormat& out) {
    if (name == "markdown" || name == "md") {
        out = ReportFormat::markdown;
        return true;
    }
    if (name == "csv") {
        out = ReportFormat::csv;
        return true;
    }
    if (name == "json") {
        out = ReportFormat::json;
        return true;
    }
    return false;
}

namespace {

std::string pm(double mean, double std_dev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, std_dev);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace

std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format) {
    if (rows.empty())
        throw error(errc::bad_argument, "report: no rows");

    switch (format) {
    case ReportFormat::csv:
        return rows_to_csv(rows);
    case ReportFormat::json: {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"dataset", r.dataset},
                           {"method", r.method},
                           {"imputer", r.imputer},
                           {"m", r.m},
                           {"seed", r.seed},
                           {"vrc", r.vrc},
                           {"vcx", r.vcx},
                           {"cost_mean", r.cost_mean},
                           {"cost_std", r.cost_std},
                           {"lof_mean", r.lof_mean},
                           {"lof_std", r.lof_std},
                           {"n_infeasible", r.n_infeasible},
                           {"n_not_converged", r.n_not_converged},
                           {"runtime_ms", r.runtime_ms}});
        }
        return arr.dump(2) + "\n";
    }
    case ReportFormat::markdown: {
        std::vector<ReportRow> sorted = rows;
        std::sort(sorted.begin(), sorted.end(), [](const ReportRow& a, const ReportRow& b) {
            return std::tie(a.method, a.dataset, a.imputer, a.m, a.seed) <
                   std::tie(b.method, b.dataset, b.imputer, b.m, b.seed);
        });
        std::ostringstream out;
        out << "| Method | Dataset | Imputer | m | VRC | VCX | Cost | LOF |\n";
        out << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : sorted)
            out << "| " << r.method << " | " << r.dataset << " | " << r.imputer << " | " << r.m
                << " | " << short_num(r.vrc) << " | " << short_num(r.vcx) << " | "
                << pm(r.cost_mean, r.cost_std) << " | " << pm(r.lof_mean, r.lof_std) << " |\n";
        return out.str();
    }
    }
    throw error(errc::bad_argument, "report: unknown format");
}

std::vector<ReportRow> rows_from_json(const std::string& text) {
    const json arr = parse_json_text(text, "rows json");
    if (!arr.is_array())
        throw error(errc::parse_error, "rows json must be an array");
    std::vector<ReportRow> rows;
    for (const auto& j : arr) {
        ReportRow r;
        r.dataset = j.at("dataset").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.imputer = j.at("imputer").get<std::string>();
        r.m = j.at("m").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.vrc = j.at("vrc").get<double>();
        r.vcx = j.at("vcx").get<double>();
        r.cost_mean = j.at("cost_mean").get<double>();
        r.cost_std = j.at("cost_std").get<double>();
        r.lof_mean = j.at("lof_mean").get<double>();
        r.lof_std = j.at("lof_std").get<double>();
        r.n_infeasible = j.at("n_infeasible").get<std::size_t>();
        r.n_not_converged = j.at("n_not_converged").get<std::size_t>();
        r.runtime_ms = j.at("runtime_ms").get<double>();
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace cxbench
