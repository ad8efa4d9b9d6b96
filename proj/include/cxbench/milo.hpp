#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cxbench/dataset.hpp"
#include "cxbench/lp.hpp"
#include "cxbench/model.hpp"

namespace cxbench {

using Box = std::vector<std::pair<double, double>>;

Box unit_box(std::size_t n);

// Exact l1-minimal counterfactual search over the ReLU classifier. The
// problem is posed over recourse variables d shared by one or more anchor
// completions: minimize ||d||_1 subject to, for every completion c,
// (2t-1) * score(c + d) >= margin and c + d inside the box. A single
// completion is the plain closest-counterfactual problem.
struct MiloProblem {
    const Classifier* clf = nullptr;
    std::vector<Instance> completions;
    int target = 1;
    double margin = 0.01;
    Box box;
};

enum class MiloStatus { optimal, infeasible, gap_limit };

struct MiloSolution {
    MiloStatus status = MiloStatus::infeasible;
    Instance point;            // completions[0] + delta
    std::vector<double> delta; // shared recourse
    double objective = 0.0;    // ||delta||_1
    double bound = 0.0;        // best lower bound (== objective when optimal)
    std::size_t nodes = 0;     // LP relaxations solved
};

// Big-M encoding with activation indicators. Units whose pre-activation
// interval over the box has a fixed sign are encoded linearly without a
// binary. pre_bounds records the propagated [lo, hi] per (completion, unit).
struct MiloModel {
    LinearProgram lp;
    std::size_t n = 0;
    std::vector<Instance> completions;
    std::vector<std::size_t> binaries; // z columns, branching order
    std::vector<std::vector<std::ptrdiff_t>> z_col; // [completion][unit]; -1 dead, -2 active
    std::vector<std::vector<std::size_t>> u_col;
    std::vector<std::vector<std::pair<double, double>>> pre_bounds;
    bool bounds_crossed = false; // completion boxes admit no shared recourse
};

MiloModel encode(const MiloProblem& prob);

// Branch-and-bound: most-fractional indicator, best-bound node order, all
// ties by lowest index. Deterministic including node counts.
MiloSolution solve_milo(const MiloProblem& prob, std::size_t node_limit = 1000000);

MiloSolution solve_armin(const Classifier& clf, const std::vector<Instance>& completions,
                         int target, double margin, const Box& box,
                         std::size_t node_limit = 1000000);

// Largest achievable (2t-1) * score over the box, as a MILO. objective holds
// the maximum margin; point attains it. Used to cap margin searches at what
// the box admits.
MiloSolution max_margin(const Classifier& clf, const Instance& anchor, int target,
                        const Box& box, std::size_t node_limit = 1000000);

// CPLEX-LP-style text dump of the encoded model.
std::string lp_text(const MiloModel& model);

} // namespace cxbench
