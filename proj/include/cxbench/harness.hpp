#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cxbench/dataset.hpp"
#include "cxbench/explain.hpp"
#include "cxbench/impute.hpp"
#include "cxbench/model.hpp"

namespace cxbench {

const char* imputer_name(ImputerKind k);
bool parse_imputer(const std::string& name, ImputerKind& out);

// One benchmark dataset: either a CSV on disk or a synthetic stand-in.
struct DatasetSpec {
    std::string name;
    std::string csv; // empty -> synthetic
    std::string target;
    double threshold = 0.5;
    std::size_t synth_rows = 600;
    std::size_t synth_features = 6;
    double synth_separation = 3.0;
};

// Per-method knobs; each method reads only its own fields.
struct MethodSettings {
    WachterParams wachter;            // wachter / apas descent
    double theta = kDefaultMargin;    // mce / armin / mcer score margin
    double radius = 0.05;             // mcer / rnce / proplace / apas perturbation scale
    double theta_max = 20.0;          // mcer bisection ceiling
    double theta_tol = 1e-3;
    std::size_t armin_draws = 5;
    std::size_t proplace_k = 10;
    std::size_t proplace_steps = 500;
    double proplace_step = 0.05;
    std::size_t apas_models = 20;
    std::size_t stce_ensemble = 10;
    bool stce_stable = false;         // false: retrained-ensemble filter, true: stability filter
    StabilityParams stability;
};

struct CellInfo {
    std::string dataset;
    Method method = Method::mce;
    ImputerKind imputer = ImputerKind::simple;
    std::size_t m = 0;
    std::uint64_t seed = 0; // the repetition's master seed
};

struct BenchConfig {
    std::vector<DatasetSpec> datasets;
    std::size_t n_batch = 100;
    std::vector<std::size_t> m_values = {1, 2, 3};
    std::vector<ImputerKind> imputers = {ImputerKind::simple, ImputerKind::knn,
                                         ImputerKind::mice};
    std::vector<std::pair<Method, MethodSettings>> methods; // empty -> all ten with defaults
    bool armin_mice_only = true;
    TrainConfig model;
    std::uint64_t master_seed = 1;
    std::size_t repetitions = 1;
    std::string output_dir; // empty -> no files written
    ImputerParams imputer_params;
    std::size_t lof_k = 20; // capped at train rows - 1
    std::size_t jobs = 1;
    bool wall_timing = false; // measured runtime breaks byte-reproducible output

    // Inspection hook (not part of the config file). Called for every
    // explanation with the true instance and the imputed anchor; invocations
    // are serialized.
    using Observer =
        std::function<void(const CellInfo&, const Instance& x_true, const Instance& x_hat,
                           const Explanation&)>;
    Observer observer;
};

std::vector<std::pair<Method, MethodSettings>> default_method_roster();

// One (dataset, method, imputer, m, seed) cell of results.
struct ReportRow {
    std::string dataset;
    std::string method;
    std::string imputer;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    double vrc = 0.0;
    double vcx = 0.0;
    double cost_mean = 0.0;
    double cost_std = 0.0;
    double lof_mean = 0.0;
    double lof_std = 0.0;
    std::size_t n_infeasible = 0;
    std::size_t n_not_converged = 0;
    double runtime_ms = 0.0;
};

BenchConfig load_bench_config(const std::string& path);
BenchConfig parse_bench_config_text(const std::string& json_text);

// Runs the full grid. When output_dir is set, writes results.csv and
// manifest.json there. Fully deterministic per master seed (wall timing off).
std::vector<ReportRow> run_bench(const BenchConfig& cfg);

std::string rows_to_csv(const std::vector<ReportRow>& rows);
void write_rows_csv(const std::vector<ReportRow>& rows, const std::string& path);
std::vector<ReportRow> read_rows_csv(const std::string& path);

std::string bench_manifest(const BenchConfig& cfg, std::size_t row_count);

enum class GroupBy { robustness, imputer, dataset };

struct GroupSummary {
    std::string group;
    std::size_t m = 0;
    std::size_t n = 0;
    double median = 0.0, q1 = 0.0, q3 = 0.0; // of VRC
};

struct GroupComparison {
    std::string a, b;
    std::size_t m = 0;
    double median_a = 0.0, median_b = 0.0;
    double u = 0.0, p = 1.0;
};

struct AggregateResult {
    std::vector<GroupSummary> summaries;
    std::vector<GroupComparison> comparisons;
};

// Robustness grouping: robust = {mcer, rnce, proplace, stce, apas},
// non-robust = {bls, mce, wachter, kdtreennce, armin}. Medians, quartiles
// and two-sided Mann-Whitney comparisons per m.
AggregateResult aggregate(const std::vector<ReportRow>& rows, GroupBy group_by);
std::string aggregate_to_text(const AggregateResult& agg);

struct SweepConfig {
    DatasetSpec dataset;
    TrainConfig model;
    std::string axis_x = "lr"; // "lr" or "eps"
    std::vector<double> grid_x;
    std::vector<double> grid_y; // lambda values
    WachterParams fixed;        // carries the non-swept parameters
    ImputerKind imputer = ImputerKind::knn;
    std::size_t m = 2;
    std::size_t n_batch = 100;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    ImputerParams imputer_params;
};

struct SweepCell {
    double x = 0.0, y = 0.0, vrc = 0.0;
};

// One VRC per grid cell; each cell runs the same pipeline as a single-method
// bench cell with those Wachter parameters.
std::vector<SweepCell> sweep_wachter(const SweepConfig& cfg);
std::string sweep_to_csv(const SweepConfig& cfg, const std::vector<SweepCell>& cells);
SweepConfig load_sweep_config(const std::string& path);

enum class ReportFormat { markdown, csv, json };
bool parse_report_format(const std::string& name, ReportFormat& out);
std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format);
std::vector<ReportRow> rows_from_json(const std::string& text);

// Shortest round-trip decimal text for a double (all CSV/JSON writers use it).
std::string format_double(double v);

} // namespace cxbench
