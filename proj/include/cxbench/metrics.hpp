#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cxbench/dataset.hpp"
#include "cxbench/explanation.hpp"
#include "cxbench/model.hpp"

namespace cxbench {

// Aggregates for one evaluation batch. LOF values follow the negated
// convention: -1 marks inliers, lower values mark outliers.
struct BatchScore {
    double vrc = 0.0;
    double vcx = 0.0;
    double cost_mean = 0.0;
    double cost_std = 0.0;
    double lof_mean = 0.0;
    double lof_std = 0.0;
    std::size_t n = 0;
};

struct LofParams {
    std::size_t k_neighbors = 20;
};

// Classic Local Outlier Factor against a fixed reference set. Reference
// k-distances and local reachability densities are precomputed once.
class LocalOutlierFactor {
public:
    LocalOutlierFactor(const Dataset& reference, std::size_t k_neighbors);

    // Returns the negated LOF of the query (-1 ~ inlier).
    double score(const Instance& query) const;

    std::size_t k() const { return k_; }

private:
    std::size_t k_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> points_;   // reference rows
    std::size_t count_ = 0;
    std::vector<double> k_dist_;   // per reference point
    std::vector<double> lrd_;      // per reference point
    std::vector<std::vector<std::size_t>> neighbors_; // k-distance neighborhoods

    double distance(const double* a, const double* b) const;
};

// Counterfactual validity: fraction of explanations whose x' is predicted as
// the target class. Results without a counterfactual are scored by x_prime
// as stored (anchor for infeasible, best iterate for non-converged).
double vcx(const Classifier& clf, std::span<const Explanation> explanations,
           std::span<const int> targets);

// Recourse validity: fraction where predicting clip_[0,1](x_true + delta)
// yields the target. clipped_count, when given, receives the number of
// instances where clipping changed a coordinate.
double vrc(const Classifier& clf, std::span<const Instance> true_inputs,
           std::span<const Explanation> explanations, std::span<const int> targets,
           std::size_t* clipped_count = nullptr);

// Mean and population std of l1 distances between x' and the true inputs.
std::pair<double, double> cost(std::span<const Instance> true_inputs,
                               std::span<const Explanation> explanations);

struct MwuResult {
    double u = 0.0;         // U statistic of the first sample
    double p_two_sided = 1.0;
};

// Rank-sum U with midranks for ties. Exact p by enumeration when
// |a| + |b| <= 12 and the pooled sample is tie-free, otherwise the normal
// approximation with tie and continuity corrections.
MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Exposed for cross-checking the two p-value routes against each other.
double mwu_exact_p(std::span<const double> a, std::span<const double> b);
double mwu_normal_p(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q); // linear interpolation

} // namespace cxbench
