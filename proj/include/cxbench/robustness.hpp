#pragma once

#include <cstdint>
#include <vector>

#include "cxbench/dataset.hpp"
#include "cxbench/model.hpp"

namespace cxbench {

// A set of plausible model variants used by the robust explainers.
struct ModelSet {
    enum class Kind { interval, sampled, retrained };
    Kind kind = Kind::sampled;
    double radius = 0.0; // sampled / interval
    std::vector<Classifier> members;
};

struct StabilityParams {
    double noise_std = 0.05;
    std::size_t samples = 100;
    double k_weight = 1.0;
    double tau = 0.6;
};

// True iff the IBP score bound certifies the target class for every
// classifier within +-radius element-wise of clf. Sound, not complete.
bool certify(const Classifier& clf, const Instance& x, int target, double radius);

// count classifiers; member 0 is clf itself, the rest have every parameter
// perturbed by uniform noise in +-radius.
ModelSet sample_models(const Classifier& clf, std::size_t count, double radius,
                       std::uint64_t seed);

// count classifiers trained on bootstrap resamples with distinct seeds. With
// bootstrap disabled all members train on the full dataset (member 0 then
// equals train(ds, cfg) exactly).
ModelSet retrain_ensemble(const Dataset& ds, const TrainConfig& cfg, std::size_t count,
                          std::uint64_t seed, bool bootstrap = true);

// mean - k_weight * std of sigmoid(score) over `samples` Gaussian input
// perturbations N(x, noise_std^2 I). Deterministic per seed.
double stability_score(const Classifier& clf, const Instance& x, const StabilityParams& params,
                       std::uint64_t seed);

} // namespace cxbench
