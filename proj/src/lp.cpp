#include "cxbench/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cxbench/errors.hpp"

namespace cxbench {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCostEps = 1e-9;
constexpr double kPivotEps = 1e-9;
constexpr double kFeasEps = 1e-7;
constexpr std::size_t kStallLimit = 50;
constexpr std::size_t kIterationCap = 500000;
} // namespace

void LinearProgram::resize(std::size_t n_vars) {
    n = n_vars;
    objective.assign(n, 0.0);
    lo.assign(n, 0.0);
    hi.assign(n, kInf);
}

void LinearProgram::add_row(std::vector<double> row, Sense sense, double b) {
    if (row.size() != n)
        throw error(errc::dimension_mismatch, "lp add_row: wrong coefficient count");
    rows.push_back(std::move(row));
    senses.push_back(sense);
    rhs.push_back(b);
}

namespace {

// Full-tableau two-phase simplex over the standard form obtained by shifting
// every variable to its lower bound and expanding finite upper bounds into
// extra rows.
class SimplexTableau {
public:
    SimplexTableau(const LinearProgram& lp, std::span<const double> lo, std::span<const double> hi)
        : lp_(lp), lo_(lo), hi_(hi) {}

    LpSolution solve() {
        build();

        // Phase 1: minimize the sum of artificials.
        if (n_art_ > 0) {
            set_phase1_costs();
            const PivotOutcome out = iterate();
            if (out == PivotOutcome::unbounded)
                throw error(errc::bad_argument, "lp: phase 1 unbounded (internal)");
            if (obj_value() > kFeasEps)
                return {LpStatus::infeasible, {}, 0.0, iterations_};
            expel_artificials();
        }

        set_phase2_costs();
        const PivotOutcome out = iterate();
        if (out == PivotOutcome::unbounded)
            return {LpStatus::unbounded, {}, 0.0, iterations_};

        LpSolution sol;
        sol.status = LpStatus::optimal;
        sol.iterations = iterations_;
        sol.x.assign(lp_.n, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < lp_.n)
                sol.x[basis_[i]] = rhs_col(i);
        for (std::size_t j = 0; j < lp_.n; ++j)
            sol.x[j] += lo_[j];
        sol.value = 0.0;
        for (std::size_t j = 0; j < lp_.n; ++j)
            sol.value += lp_.objective[j] * sol.x[j];
        return sol;
    }

private:
    enum class PivotOutcome { optimal, unbounded };

    const LinearProgram& lp_;
    std::span<const double> lo_;
    std::span<const double> hi_;

    std::size_t m_ = 0;     // tableau rows
    std::size_t cols_ = 0;  // structural + slack + artificial
    std::size_t n_art_ = 0;
    std::size_t art_begin_ = 0;
    std::vector<double> tab_; // m_ x (cols_ + 1), last column is rhs
    std::vector<double> cost_;
    std::vector<std::size_t> basis_;
    std::vector<bool> banned_;
    double obj_shift_ = 0.0; // constant part of the current objective
    std::vector<double> red_; // reduced costs
    double red_rhs_ = 0.0;    // negated objective value
    std::size_t iterations_ = 0;
    bool bland_ = false;
    std::size_t stall_ = 0;

    double& at(std::size_t i, std::size_t j) { return tab_[i * (cols_ + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return tab_[i * (cols_ + 1) + j]; }
    double rhs_col(std::size_t i) const { return at(i, cols_); }

    void build() {
        for (std::size_t j = 0; j < lp_.n; ++j) {
            if (!std::isfinite(lo_[j]))
                throw error(errc::bad_argument, "lp: lower bounds must be finite");
            if (hi_[j] < lo_[j] - 1e-12)
                throw error(errc::bad_argument, "lp: lower bound exceeds upper bound");
        }

        struct RawRow {
            std::vector<double> a;
            Sense sense;
            double b;
        };
        std::vector<RawRow> raw;
        raw.reserve(lp_.rows.size() + lp_.n);
        for (std::size_t i = 0; i < lp_.rows.size(); ++i) {
            double shift = 0.0;
            for (std::size_t j = 0; j < lp_.n; ++j)
                shift += lp_.rows[i][j] * lo_[j];
            raw.push_back({lp_.rows[i], lp_.senses[i], lp_.rhs[i] - shift});
        }
        for (std::size_t j = 0; j < lp_.n; ++j) {
            if (!std::isfinite(hi_[j]))
                continue;
            std::vector<double> a(lp_.n, 0.0);
            a[j] = 1.0;
            raw.push_back({std::move(a), Sense::le, hi_[j] - lo_[j]});
        }

        m_ = raw.size();
        // One slack/surplus column per inequality row; artificials assigned after.
        std::vector<std::ptrdiff_t> slack_col(m_, -1);
        std::size_t n_slack = 0;
        for (std::size_t i = 0; i < m_; ++i)
            if (raw[i].sense != Sense::eq)
                slack_col[i] = static_cast<std::ptrdiff_t>(lp_.n + n_slack++);

        // Determine which rows need artificials (after sign normalization the
        // slack must have coefficient +1 to serve as the initial basis).
        std::vector<bool> negate(m_, false);
        std::vector<bool> needs_art(m_, false);
        n_art_ = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            negate[i] = raw[i].b < 0.0;
            double slack_coef = 0.0;
            if (raw[i].sense == Sense::le)
                slack_coef = 1.0;
            else if (raw[i].sense == Sense::ge)
                slack_coef = -1.0;
            if (negate[i])
                slack_coef = -slack_coef;
            needs_art[i] = raw[i].sense == Sense::eq || slack_coef < 0.0;
            if (needs_art[i])
                ++n_art_;
        }

        art_begin_ = lp_.n + n_slack;
        cols_ = art_begin_ + n_art_;
        tab_.assign(m_ * (cols_ + 1), 0.0);
        basis_.assign(m_, 0);
        banned_.assign(cols_, false);

        std::size_t art = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double sgn = negate[i] ? -1.0 : 1.0;
            for (std::size_t j = 0; j < lp_.n; ++j)
                at(i, j) = sgn * raw[i].a[j];
            at(i, cols_) = sgn * raw[i].b;
            if (slack_col[i] >= 0) {
                const double base = raw[i].sense == Sense::le ? 1.0 : -1.0;
                at(i, static_cast<std::size_t>(slack_col[i])) = sgn * base;
            }
            if (needs_art[i]) {
                const std::size_t col = art_begin_ + art++;
                at(i, col) = 1.0;
                basis_[i] = col;
            } else {
                basis_[i] = static_cast<std::size_t>(slack_col[i]);
            }
        }
    }

    void set_phase1_costs() {
        cost_.assign(cols_, 0.0);
        for (std::size_t j = art_begin_; j < cols_; ++j)
            cost_[j] = 1.0;
        recompute_reduced();
    }

    void set_phase2_costs() {
        cost_.assign(cols_, 0.0);
        for (std::size_t j = 0; j < lp_.n; ++j)
            cost_[j] = lp_.objective[j];
        for (std::size_t j = art_begin_; j < cols_; ++j)
            banned_[j] = true;
        recompute_reduced();
        bland_ = false;
        stall_ = 0;
    }

    void recompute_reduced() {
        red_.assign(cols_ + 1, 0.0);
        for (std::size_t j = 0; j < cols_; ++j)
            red_[j] = cost_[j];
        red_rhs_ = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0)
                continue;
            for (std::size_t j = 0; j < cols_; ++j)
                red_[j] -= cb * at(i, j);
            red_rhs_ -= cb * rhs_col(i);
        }
    }

    double obj_value() const { return -red_rhs_; }

    PivotOutcome iterate() {
        while (true) {
            if (iterations_ > kIterationCap)
                throw error(errc::bad_argument, "lp: iteration cap exceeded");

            std::ptrdiff_t enter = -1;
            if (bland_) {
                for (std::size_t j = 0; j < cols_; ++j)
                    if (!banned_[j] && red_[j] < -kCostEps) {
                        enter = static_cast<std::ptrdiff_t>(j);
                        break;
                    }
            } else {
                double best = -kCostEps;
                for (std::size_t j = 0; j < cols_; ++j)
                    if (!banned_[j] && red_[j] < best) {
                        best = red_[j];
                        enter = static_cast<std::ptrdiff_t>(j);
                    }
            }
            if (enter < 0)
                return PivotOutcome::optimal;
            const std::size_t je = static_cast<std::size_t>(enter);

            std::ptrdiff_t leave = -1;
            double best_ratio = kInf;
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, je);
                if (a <= kPivotEps)
                    continue;
                const double ratio = rhs_col(i) / a;
                if (ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 &&
                     (leave < 0 || basis_[i] < basis_[static_cast<std::size_t>(leave)]))) {
                    best_ratio = ratio;
                    leave = static_cast<std::ptrdiff_t>(i);
                }
            }
            if (leave < 0)
                return PivotOutcome::unbounded;

            const double before = obj_value();
            pivot(static_cast<std::size_t>(leave), je);
            ++iterations_;
            if (!bland_) {
                if (before - obj_value() < 1e-12) {
                    if (++stall_ >= kStallLimit)
                        bland_ = true;
                } else {
                    stall_ = 0;
                }
            }
        }
    }

    void pivot(std::size_t ie, std::size_t je) {
        const double p = at(ie, je);
        double* prow = tab_.data() + ie * (cols_ + 1);
        const double invp = 1.0 / p;
        for (std::size_t j = 0; j <= cols_; ++j)
            prow[j] *= invp;
        prow[je] = 1.0;

        for (std::size_t i = 0; i < m_; ++i) {
            if (i == ie)
                continue;
            double* row = tab_.data() + i * (cols_ + 1);
            const double f = row[je];
            if (f == 0.0)
                continue;
            for (std::size_t j = 0; j <= cols_; ++j)
                row[j] -= f * prow[j];
            row[je] = 0.0;
        }
        const double f = red_[je];
        if (f != 0.0) {
            for (std::size_t j = 0; j < cols_; ++j)
                red_[j] -= f * prow[j];
            red_rhs_ -= f * prow[cols_];
            red_[je] = 0.0;
        }
        basis_[ie] = je;
    }

    // After phase 1, pivot still-basic artificials onto structural columns
    // where possible; rows that cannot be cleared are redundant and their
    // artificial stays banned at level zero.
    void expel_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < art_begin_)
                continue;
            std::ptrdiff_t col = -1;
            for (std::size_t j = 0; j < art_begin_; ++j)
                if (std::abs(at(i, j)) > kPivotEps) {
                    col = static_cast<std::ptrdiff_t>(j);
                    break;
                }
            if (col >= 0) {
                pivot(i, static_cast<std::size_t>(col));
                ++iterations_;
            }
        }
    }
};

} // namespace

LpSolution lp_solve(const LinearProgram& lp, std::span<const double> lo,
                    std::span<const double> hi) {
    if (lp.objective.size() != lp.n || lo.size() != lp.n || hi.size() != lp.n)
        throw error(errc::dimension_mismatch, "lp_solve: inconsistent dimensions");
    SimplexTableau t(lp, lo, hi);
    return t.solve();
}

LpSolution lp_solve(const LinearProgram& lp) { return lp_solve(lp, lp.lo, lp.hi); }

} // namespace cxbench
