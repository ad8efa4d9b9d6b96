#include "cxbench/robustness.hpp"

#include <algorithm>
#include <cmath>

#include "cxbench/errors.hpp"
#include "cxbench/rng.hpp"

namespace cxbench {

bool certify(const Classifier& clf, const Instance& x, int target, double radius) {
    if (radius < 0.0)
        throw error(errc::bad_argument, "certify: radius must be non-negative");
    const auto [lo, hi] = interval_score(clf, x, WeightInterval{radius});
    return target == 1 ? lo > 0.0 : hi < 0.0;
}

ModelSet sample_models(const Classifier& clf, std::size_t count, double radius,
                       std::uint64_t seed) {
    if (count < 1)
        throw error(errc::bad_argument, "sample_models: count must be >= 1");
    if (radius < 0.0)
        throw error(errc::bad_argument, "sample_models: radius must be non-negative");

    ModelSet set;
    set.kind = ModelSet::Kind::sampled;
    set.radius = radius;
    set.members.reserve(count);
    set.members.push_back(clf);

    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> noise(-radius, radius);
    for (std::size_t p = 1; p < count; ++p) {
        Classifier m = clf;
        for (double& w : m.W1)
            w += noise(rng);
        for (double& b : m.b1)
            b += noise(rng);
        for (double& w : m.w2)
            w += noise(rng);
        m.b2 += noise(rng);
        set.members.push_back(std::move(m));
    }
    return set;
}

ModelSet retrain_ensemble(const Dataset& ds, const TrainConfig& cfg, std::size_t count,
                          std::uint64_t seed, bool bootstrap) {
    if (count < 1)
        throw error(errc::bad_argument, "retrain_ensemble: count must be >= 1");

    ModelSet set;
    set.kind = ModelSet::Kind::retrained;
    set.members.reserve(count);

    for (std::size_t e = 0; e < count; ++e) {
        TrainConfig member_cfg = cfg;
        if (bootstrap || e > 0)
            member_cfg.seed = derive_seed({cfg.seed, fnv1a("retrain-member"), e});

        if (!bootstrap) {
            set.members.push_back(train(ds, member_cfg));
            continue;
        }

        Dataset sample;
        sample.cols = ds.cols;
        sample.rows = ds.rows;
        sample.feature_names = ds.feature_names;
        sample.norm_params = ds.norm_params;
        bool ok = false;
        for (std::size_t attempt = 0; attempt < 10 && !ok; ++attempt) {
            auto rng = make_rng(derive_seed({seed, fnv1a("bootstrap"), e, attempt}));
            std::uniform_int_distribution<std::size_t> pick(0, ds.rows - 1);
            sample.features.clear();
            sample.labels.clear();
            for (std::size_t i = 0; i < ds.rows; ++i) {
                const std::size_t src = pick(rng);
                auto r = ds.row(src);
                sample.features.insert(sample.features.end(), r.begin(), r.end());
                sample.labels.push_back(ds.labels[src]);
            }
            const bool has0 = std::any_of(sample.labels.begin(), sample.labels.end(),
                                          [](int l) { return l == 0; });
            const bool has1 = std::any_of(sample.labels.begin(), sample.labels.end(),
                                          [](int l) { return l == 1; });
            ok = has0 && has1;
        }
        if (!ok)
            throw error(errc::single_class,
                        "retrain_ensemble: bootstrap produced a single class 10 times");
        set.members.push_back(train(sample, member_cfg));
    }
    return set;
}

double stability_score(const Classifier& clf, const Instance& x, const StabilityParams& params,
                       std::uint64_t seed) {
    if (!(params.noise_std > 0.0) || params.samples < 2)
        throw error(errc::bad_argument, "stability_score: need noise_std > 0 and samples >= 2");
    if (x.size() != clf.n_in)
        throw error(errc::dimension_mismatch, "stability_score: dimension mismatch");

    auto rng = make_rng(seed);
    std::normal_distribution<double> noise(0.0, params.noise_std);

    std::vector<double> probs(params.samples);
    Instance draw(x.size());
    for (std::size_t s = 0; s < params.samples; ++s) {
        for (std::size_t i = 0; i < x.size(); ++i)
            draw[i] = x[i] + noise(rng);
        probs[s] = sigmoid(clf.score(draw));
    }
    double mean = 0.0;
    for (double p : probs)
        mean += p;
    mean /= static_cast<double>(params.samples);
    double var = 0.0;
    for (double p : probs)
        var += (p - mean) * (p - mean);
    var /= static_cast<double>(params.samples);
    return mean - params.k_weight * std::sqrt(var);
}

} // namespace cxbench
