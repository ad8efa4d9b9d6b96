#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxbench/dataset.hpp"

namespace cxbench {

struct TrainConfig {
    std::size_t hidden_width = 16;
    std::size_t epochs = 200;
    double step_size = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

// Element-wise perturbation radius applied to every weight and bias.
struct WeightInterval {
    double radius = 0.0;
};

// Two-layer ReLU binary classifier:
//   score(x) = w2 . relu(W1 x + b1) + b2,   h(x) = 1 iff score(x) >= 0.
struct Classifier {
    std::size_t n_in = 0;
    std::size_t hidden = 0;
    std::vector<double> W1; // hidden x n_in, row-major
    std::vector<double> b1; // hidden
    std::vector<double> w2; // hidden
    double b2 = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> norm_params; // carried from the training data

    // Pre-activations W1 x + b1.
    std::vector<double> hidden_pre(std::span<const double> x) const;
    double score(std::span<const double> x) const;
    int predict_class(std::span<const double> x) const { return score(x) >= 0.0 ? 1 : 0; }
};

struct Prediction {
    int label = 0;
    double score = 0.0;
};

double sigmoid(double s);

// Mini-batch gradient descent on binary cross-entropy of sigmoid(score).
// Deterministic given cfg.seed; epochs == 0 returns the seeded initialization.
Classifier train(const Dataset& ds, const TrainConfig& cfg);

Prediction predict(const Classifier& clf, const Instance& x);

// Analytic gradient of sigmoid(score(x)) w.r.t. x (ReLU subgradient 0 at 0).
std::vector<double> input_gradient(const Classifier& clf, const Instance& x);

// Sound [lo, hi] bounds on score(x) over every classifier whose parameters
// lie within +-wi.radius element-wise of clf, via interval arithmetic.
std::pair<double, double> interval_score(const Classifier& clf, const Instance& x,
                                         const WeightInterval& wi);

void save(const Classifier& clf, const std::string& path);
Classifier load(const std::string& path);

double mean_bce_loss(const Classifier& clf, const Dataset& ds);
double accuracy(const Classifier& clf, const Dataset& ds);

} // namespace cxbench
