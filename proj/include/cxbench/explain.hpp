#pragma once

#include <cstdint>
#include <vector>

#include "cxbench/dataset.hpp"
#include "cxbench/explanation.hpp"
#include "cxbench/milo.hpp"
#include "cxbench/model.hpp"
#include "cxbench/robustness.hpp"

namespace cxbench {

// Default score margin applied by the solver-backed methods and the BLS
// boundary nudge, so counterfactuals sit strictly past the threshold.
constexpr double kDefaultMargin = 0.01;

// Gradient descent on  lambda * ||x' - anchor||_1 + (1 - lambda) * (p(x') - t)^2
// clipped to the box each step; stops once the confidence margin eps is met.
Explanation wachter(const Classifier& clf, const Instance& anchor, int target,
                    const WachterParams& params, const Box& box);

// Binary search for the boundary crossing on the segment between the anchor
// and a seeded random training point predicted as the target class.
Explanation bls(const Classifier& clf, const Dataset& train, const Instance& anchor, int target,
                std::uint64_t seed, double margin = kDefaultMargin);

struct NnceFilter {
    enum class Kind { none, certified, ensemble, stable };
    Kind kind = Kind::none;
    double radius = 0.0;            // certified
    const ModelSet* models = nullptr; // ensemble
    StabilityParams stability;      // stable
    std::uint64_t seed = 0;         // stable
};

// Nearest training point predicted as the target class that passes the
// filter, scanning in ascending l1 distance. Backs KDTreeNNCE (none),
// RNCE (certified) and STCE (ensemble or stable).
Explanation nnce(const Classifier& clf, const Dataset& train, const Instance& anchor, int target,
                 const NnceFilter& filter);

struct MiloMode {
    enum class Kind { mce, mcer, armin };
    Kind kind = Kind::mce;
    double theta = kDefaultMargin;
    double radius = 0.0;                // mcer
    double theta_max = 20.0;            // mcer
    double theta_tol = 1e-3;            // mcer
    std::vector<Instance> completions;  // armin
};

// MCE: solve at theta. MCER: bisection for the smallest theta whose optimum
// certifies at the radius. ARMIN: shared recourse over all completions.
Explanation milo_explain(const Classifier& clf, const Instance& anchor, int target,
                         const MiloMode& mode, const Box& box);

// Minimizes l1 distance over the convex hull of the k nearest certified
// target-class training points via projected gradient on simplex weights,
// bisecting toward the nearest certified vertex if the optimum fails
// certification.
Explanation proplace(const Classifier& clf, const Dataset& train, const Instance& anchor,
                     int target, double radius, std::size_t k, const Box& box,
                     std::size_t steps = 500, double step_size = 0.05);

// Wachter-style descent against the worst member of a sampled model set;
// stops when every member satisfies the confidence margin.
Explanation apas(const Classifier& clf, const Instance& anchor, int target,
                 const ModelSet& models, const WachterParams& params, const Box& box);

} // namespace cxbench
