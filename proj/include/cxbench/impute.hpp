#pragma once

#include <cstdint>
#include <vector>

#include "cxbench/dataset.hpp"

namespace cxbench {

enum class ImputerKind { simple, knn, mice };

struct ImputerParams {
    std::size_t knn_k = 5;
    std::size_t mice_max_iter = 10;
    double mice_tol = 1e-6;
};

struct Imputed {
    Instance x;
    bool mean_fallback = false; // kNN had no observed coordinate to measure distance on
};

// The three imputation strategies behind one interface. Observed coordinates
// are never altered.
//   simple: feature-wise training mean.
//   knn:    l2 distance over observed coordinates, unweighted mean of the k
//           nearest training rows at each missing coordinate.
//   mice:   per-feature OLS regressors from all other features, applied in
//           index order for up to max_iter rounds (mean initialization).
class Imputer {
public:
    static Imputer fit(ImputerKind kind, const Dataset& train, const ImputerParams& params = {});

    // change_trace, when given, receives the per-round max coordinate change
    // of the MICE sweep (empty for the other kinds).
    Imputed impute(const IncompleteInstance& obs, std::vector<double>* change_trace = nullptr) const;

    // MICE only: draws completions; draw 0 is the plain MICE completion, draw
    // j >= 1 refits on a bootstrap resample seeded by seed + j.
    std::vector<Instance> impute_multi(const IncompleteInstance& obs, std::size_t draws,
                                       std::uint64_t seed) const;

    ImputerKind kind() const { return kind_; }
    const std::vector<double>& column_means() const { return means_; }
    // MICE: regression coefficients for feature f over the other columns
    // (coefficient at index f is unused) plus intercept.
    const std::vector<double>& regression_coef(std::size_t f) const { return coef_[f]; }
    double regression_intercept(std::size_t f) const { return intercept_[f]; }

private:
    ImputerKind kind_ = ImputerKind::simple;
    std::size_t cols_ = 0;
    ImputerParams params_;
    std::vector<double> means_;
    // Training matrix, kept for kNN queries and MICE bootstrap refits.
    std::vector<double> train_rows_;
    std::size_t train_count_ = 0;
    std::vector<std::vector<double>> coef_;
    std::vector<double> intercept_;

    void fit_mice_regressors(const std::vector<double>& rows, std::size_t n_rows);
    Instance run_mice(const IncompleteInstance& obs, std::vector<double>* change_trace) const;
};

} // namespace cxbench
