#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cxbench {

enum class Sense { le, eq, ge };

enum class LpStatus { optimal, infeasible, unbounded };

// Dense linear program: minimize c.v subject to A v (sense) b and
// lo <= v <= hi. Lower bounds must be finite; upper bounds may be +inf.
struct LinearProgram {
    std::size_t n = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<Sense> senses;
    std::vector<double> rhs;
    std::vector<double> lo, hi;

    void resize(std::size_t n_vars);
    void add_row(std::vector<double> row, Sense sense, double b);
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
};

// Two-phase dense simplex. Dantzig pricing with an anti-cycling guard that
// switches to Bland's rule when the objective stalls; all tie-breaks by
// lowest index, so identical inputs pivot identically.
LpSolution lp_solve(const LinearProgram& lp);

// Same solve with the variable bounds replaced (used by branch-and-bound to
// fix binaries without copying the constraint matrix).
LpSolution lp_solve(const LinearProgram& lp, std::span<const double> lo,
                    std::span<const double> hi);

} // namespace cxbench
