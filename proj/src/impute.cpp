#include "cxbench/impute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cxbench/errors.hpp"
#include "cxbench/rng.hpp"

namespace cxbench {

namespace {

// Solves the normal equations G beta = r by Gaussian elimination with partial
// pivoting. Near-singular pivots zero the corresponding coefficient.
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> G, std::vector<double> r) {
    const std::size_t p = r.size();
    std::vector<std::size_t> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> beta(p, 0.0);

    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < p; ++i)
            if (std::abs(G[i][k]) > std::abs(G[piv][k]))
                piv = i;
        if (std::abs(G[piv][k]) < 1e-12) {
            // Dependent column: fix its coefficient to zero.
            for (std::size_t i = 0; i < p; ++i)
                G[i][k] = 0.0;
            G[k][k] = 1.0;
            r[k] = 0.0;
            continue;
        }
        std::swap(G[k], G[piv]);
        std::swap(r[k], r[piv]);
        for (std::size_t i = k + 1; i < p; ++i) {
            const double f = G[i][k] / G[k][k];
            if (f == 0.0)
                continue;
            for (std::size_t j = k; j < p; ++j)
                G[i][j] -= f * G[k][j];
            r[i] -= f * r[k];
        }
    }
    for (std::size_t k = p; k-- > 0;) {
        double s = r[k];
        for (std::size_t j = k + 1; j < p; ++j)
            s -= G[k][j] * beta[j];
        beta[k] = s / G[k][k];
    }
    return beta;
}

} // namespace

Imputer Imputer::fit(ImputerKind kind, const Dataset& train, const ImputerParams& params) {
    if (train.rows == 0)
        throw error(errc::no_usable_rows, "imputer fit: empty training set");
    if (kind == ImputerKind::knn && params.knn_k > train.rows)
        throw error(errc::bad_argument, "imputer fit: k exceeds training rows");
    if (kind == ImputerKind::knn && params.knn_k == 0)
        throw error(errc::bad_argument, "imputer fit: k must be positive");

    Imputer imp;
    imp.kind_ = kind;
    imp.cols_ = train.cols;
    imp.params_ = params;

    imp.means_.assign(train.cols, 0.0);
    for (std::size_t i = 0; i < train.rows; ++i)
        for (std::size_t j = 0; j < train.cols; ++j)
            imp.means_[j] += train.at(i, j);
    for (double& m : imp.means_)
        m /= static_cast<double>(train.rows);

    if (kind != ImputerKind::simple) {
        imp.train_rows_ = train.features;
        imp.train_count_ = train.rows;
    }
    if (kind == ImputerKind::mice)
        imp.fit_mice_regressors(imp.train_rows_, imp.train_count_);
    return imp;
}

void Imputer::fit_mice_regressors(const std::vector<double>& rows, std::size_t n_rows) {
    coef_.assign(cols_, std::vector<double>(cols_, 0.0));
    intercept_.assign(cols_, 0.0);
    const std::size_t p = cols_; // predictors: the other columns plus intercept

    for (std::size_t f = 0; f < cols_; ++f) {
        // Design per row: [other columns..., 1]; Gram is p x p.
        std::vector<std::vector<double>> G(p, std::vector<double>(p, 0.0));
        std::vector<double> r(p, 0.0);
        std::vector<double> design(p);
        for (std::size_t i = 0; i < n_rows; ++i) {
            const double* row = rows.data() + i * cols_;
            std::size_t d = 0;
            for (std::size_t j = 0; j < cols_; ++j)
                if (j != f)
                    design[d++] = row[j];
            design[d] = 1.0;
            const double y = row[f];
            for (std::size_t a = 0; a < p; ++a) {
                r[a] += design[a] * y;
                for (std::size_t b = a; b < p; ++b)
                    G[a][b] += design[a] * design[b];
            }
        }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < a; ++b)
                G[a][b] = G[b][a];

        std::vector<double> beta = solve_normal_equations(std::move(G), std::move(r));
        std::size_t d = 0;
        for (std::size_t j = 0; j < cols_; ++j)
            if (j != f)
                coef_[f][j] = beta[d++];
        intercept_[f] = beta[p - 1];
    }
}

Instance Imputer::run_mice(const IncompleteInstance& obs, std::vector<double>* change_trace) const {
    Instance x = obs.values;
    std::vector<std::size_t> missing = obs.missing_indices();
    for (std::size_t f : missing)
        x[f] = means_[f];

    for (std::size_t it = 0; it < params_.mice_max_iter; ++it) {
        double max_change = 0.0;
        for (std::size_t f : missing) {
            double v = intercept_[f];
            for (std::size_t j = 0; j < cols_; ++j)
                if (j != f)
                    v += coef_[f][j] * x[j];
            max_change = std::max(max_change, std::abs(v - x[f]));
            x[f] = v;
        }
        if (change_trace)
            change_trace->push_back(max_change);
        if (max_change < params_.mice_tol)
            break;
    }
    return x;
}

Imputed Imputer::impute(const IncompleteInstance& obs, std::vector<double>* change_trace) const {
    if (obs.values.size() != cols_)
        throw error(errc::dimension_mismatch, "impute: feature count mismatch");
    if (change_trace)
        change_trace->clear();

    if (obs.complete())
        return Imputed{obs.values, false};

    switch (kind_) {
    case ImputerKind::simple: {
        Instance x = obs.values;
        for (std::size_t j = 0; j < cols_; ++j)
            if (obs.missing(j))
                x[j] = means_[j];
        return Imputed{std::move(x), false};
    }
    case ImputerKind::knn: {
        std::vector<std::size_t> observed;
        for (std::size_t j = 0; j < cols_; ++j)
            if (!obs.missing(j))
                observed.push_back(j);
        if (observed.empty()) {
            Instance x = means_;
            return Imputed{std::move(x), true};
        }
        std::vector<std::pair<double, std::size_t>> dist(train_count_);
        for (std::size_t i = 0; i < train_count_; ++i) {
            const double* row = train_rows_.data() + i * cols_;
            double d2 = 0.0;
            for (std::size_t j : observed) {
                const double diff = row[j] - obs.values[j];
                d2 += diff * diff;
            }
            dist[i] = {d2, i};
        }
        const std::size_t k = std::min(params_.knn_k, train_count_);
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        Instance x = obs.values;
        for (std::size_t j = 0; j < cols_; ++j) {
            if (!obs.missing(j))
                continue;
            double s = 0.0;
            for (std::size_t a = 0; a < k; ++a)
                s += train_rows_[dist[a].second * cols_ + j];
            x[j] = s / static_cast<double>(k);
        }
        return Imputed{std::move(x), false};
    }
    case ImputerKind::mice:
        return Imputed{run_mice(obs, change_trace), false};
    }
    throw error(errc::bad_argument, "impute: unknown imputer kind");
}

std::vector<Instance> Imputer::impute_multi(const IncompleteInstance& obs, std::size_t draws,
                                            std::uint64_t seed) const {
    if (kind_ != ImputerKind::mice)
        throw error(errc::bad_argument, "impute_multi requires a MICE imputer");
    if (draws == 0)
        throw error(errc::bad_argument, "impute_multi: draws must be >= 1");
    if (obs.values.size() != cols_)
        throw error(errc::dimension_mismatch, "impute_multi: feature count mismatch");

    std::vector<Instance> out;
    out.reserve(draws);
    out.push_back(run_mice(obs, nullptr));
    if (obs.complete()) {
        out.assign(draws, obs.values);
        return out;
    }

    for (std::size_t j = 1; j < draws; ++j) {
        auto rng = make_rng(seed + j);
        std::uniform_int_distribution<std::size_t> pick(0, train_count_ - 1);
        std::vector<double> resample(train_count_ * cols_);
        for (std::size_t i = 0; i < train_count_; ++i) {
            const std::size_t src = pick(rng);
            std::copy_n(train_rows_.data() + src * cols_, cols_, resample.data() + i * cols_);
        }
        Imputer boot;
        boot.kind_ = ImputerKind::mice;
        boot.cols_ = cols_;
        boot.params_ = params_;
        boot.train_count_ = train_count_;
        boot.means_.assign(cols_, 0.0);
        for (std::size_t i = 0; i < train_count_; ++i)
            for (std::size_t c = 0; c < cols_; ++c)
                boot.means_[c] += resample[i * cols_ + c];
        for (double& m : boot.means_)
            m /= static_cast<double>(train_count_);
        boot.fit_mice_regressors(resample, train_count_);
        out.push_back(boot.run_mice(obs, nullptr));
    }
    return out;
}

} // namespace cxbench
