#include "cxbench/milo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "cxbench/errors.hpp"

namespace cxbench {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kIntEps = 1e-6;
constexpr double kPruneEps = 1e-9;
} // namespace

Box unit_box(std::size_t n) { return Box(n, {0.0, 1.0}); }

MiloModel encode(const MiloProblem& prob) {
    if (!prob.clf)
        throw error(errc::bad_argument, "encode: missing classifier");
    const Classifier& clf = *prob.clf;
    const std::size_t n = clf.n_in;
    if (prob.completions.empty())
        throw error(errc::bad_argument, "encode: at least one completion required");
    if (prob.box.size() != n)
        throw error(errc::dimension_mismatch, "encode: box dimension mismatch");
    if (prob.margin < 0.0)
        throw error(errc::bad_argument, "encode: margin must be non-negative");
    for (const auto& [lo, hi] : prob.box)
        if (lo > hi)
            throw error(errc::bad_argument, "encode: empty box");
    for (const auto& c : prob.completions)
        if (c.size() != n)
            throw error(errc::dimension_mismatch, "encode: completion dimension mismatch");

    const std::size_t J = prob.completions.size();
    const std::size_t h = clf.hidden;
    const double sgn_t = prob.target == 1 ? 1.0 : -1.0;

    MiloModel model;
    model.n = n;
    model.completions = prob.completions;

    // Shared recourse bounds: the intersection of box - completion over all
    // completions. A crossed interval means no shared recourse exists.
    std::vector<double> dlo(n), dhi(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lo = -kInf, hi = kInf;
        for (const auto& c : prob.completions) {
            lo = std::max(lo, prob.box[i].first - c[i]);
            hi = std::min(hi, prob.box[i].second - c[i]);
        }
        dlo[i] = lo;
        dhi[i] = hi;
        if (lo > hi + 1e-12)
            model.bounds_crossed = true;
    }
    if (model.bounds_crossed) {
        for (std::size_t i = 0; i < n; ++i)
            dhi[i] = std::max(dhi[i], dlo[i]);
    }

    // Pre-activation intervals per (completion, unit) and activation phases.
    model.pre_bounds.assign(J, std::vector<std::pair<double, double>>(h));
    model.z_col.assign(J, std::vector<std::ptrdiff_t>(h, -1));
    model.u_col.assign(J, std::vector<std::size_t>(h, 0));

    for (std::size_t c = 0; c < J; ++c) {
        for (std::size_t j = 0; j < h; ++j) {
            const double* wrow = clf.W1.data() + j * n;
            double base = clf.b1[j];
            for (std::size_t i = 0; i < n; ++i)
                base += wrow[i] * prob.completions[c][i];
            double lo = base, hi = base;
            for (std::size_t i = 0; i < n; ++i) {
                const double a = wrow[i] * dlo[i], b = wrow[i] * dhi[i];
                lo += std::min(a, b);
                hi += std::max(a, b);
            }
            model.pre_bounds[c][j] = {lo, hi};
        }
    }

    // Column layout: [delta (n)] [e (n)] then per completion the u block and
    // one z per sign-free unit.
    std::size_t cols = 2 * n;
    for (std::size_t c = 0; c < J; ++c) {
        for (std::size_t j = 0; j < h; ++j) {
            model.u_col[c][j] = cols++;
            const auto [lo, hi] = model.pre_bounds[c][j];
            if (hi <= 0.0)
                model.z_col[c][j] = -1; // always dead
            else if (lo >= 0.0)
                model.z_col[c][j] = -2; // always active
            else {
                model.z_col[c][j] = static_cast<std::ptrdiff_t>(cols);
                model.binaries.push_back(cols);
                ++cols;
            }
        }
    }

    LinearProgram& lp = model.lp;
    lp.resize(cols);
    for (std::size_t i = 0; i < n; ++i) {
        lp.lo[i] = dlo[i];
        lp.hi[i] = dhi[i];
        lp.objective[n + i] = 1.0;
        lp.lo[n + i] = 0.0;
        lp.hi[n + i] = std::max({std::abs(dlo[i]), std::abs(dhi[i]), 0.0});
    }

    auto row = [&](void) { return std::vector<double>(cols, 0.0); };

    // e_i >= |delta_i|
    for (std::size_t i = 0; i < n; ++i) {
        auto r1 = row();
        r1[i] = 1.0;
        r1[n + i] = -1.0;
        lp.add_row(std::move(r1), Sense::le, 0.0);
        auto r2 = row();
        r2[i] = -1.0;
        r2[n + i] = -1.0;
        lp.add_row(std::move(r2), Sense::le, 0.0);
    }

    for (std::size_t c = 0; c < J; ++c) {
        for (std::size_t j = 0; j < h; ++j) {
            const double* wrow = clf.W1.data() + j * n;
            double base = clf.b1[j];
            for (std::size_t i = 0; i < n; ++i)
                base += wrow[i] * prob.completions[c][i];
            const std::size_t uc = model.u_col[c][j];
            const auto [albo, ahbo] = model.pre_bounds[c][j];

            if (model.z_col[c][j] == -1) { // dead: u = 0
                lp.lo[uc] = 0.0;
                lp.hi[uc] = 0.0;
                continue;
            }
            lp.lo[uc] = std::max(0.0, albo);
            lp.hi[uc] = std::max(0.0, ahbo);

            if (model.z_col[c][j] == -2) { // active: u = a
                auto r = row();
                for (std::size_t i = 0; i < n; ++i)
                    r[i] = wrow[i];
                r[uc] = -1.0;
                lp.add_row(std::move(r), Sense::eq, -base);
                continue;
            }

            const double m_plus = ahbo;   // > 0
            const double m_minus = -albo; // > 0
            const auto zc = static_cast<std::size_t>(model.z_col[c][j]);
            lp.lo[zc] = 0.0;
            lp.hi[zc] = 1.0;

            // u >= a  <=>  a - u <= 0
            auto r1 = row();
            for (std::size_t i = 0; i < n; ++i)
                r1[i] = wrow[i];
            r1[uc] = -1.0;
            lp.add_row(std::move(r1), Sense::le, -base);

            // u <= a + m_minus (1 - z)
            auto r2 = row();
            for (std::size_t i = 0; i < n; ++i)
                r2[i] = -wrow[i];
            r2[uc] = 1.0;
            r2[zc] = m_minus;
            lp.add_row(std::move(r2), Sense::le, base + m_minus);

            // u <= m_plus z
            auto r3 = row();
            r3[uc] = 1.0;
            r3[zc] = -m_plus;
            lp.add_row(std::move(r3), Sense::le, 0.0);
        }

        // Validity: (2t-1)(w2 . u + b2) >= margin
        auto rv = row();
        for (std::size_t j = 0; j < h; ++j)
            rv[model.u_col[c][j]] = sgn_t * clf.w2[j];
        lp.add_row(std::move(rv), Sense::ge, prob.margin - sgn_t * clf.b2);
    }

    return model;
}

namespace {

struct Node {
    double bound;
    std::size_t id;
    std::vector<signed char> fix; // per binary: -1 unfixed, 0, 1
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound)
            return a.bound > b.bound; // min-heap on bound
        return a.id > b.id;
    }
};

} // namespace

namespace {

// Branch-and-bound over the encoded model's binaries. sol.objective is the
// LP objective value of the incumbent.
MiloSolution branch_and_bound(const MiloModel& model, std::size_t node_limit) {
    MiloSolution sol;
    if (model.bounds_crossed) {
        sol.status = MiloStatus::infeasible;
        return sol;
    }

    const std::size_t n = model.n;
    const std::size_t nb = model.binaries.size();

    std::vector<double> lo = model.lp.lo, hi = model.lp.hi;
    auto apply_fix = [&](const std::vector<signed char>& fix) {
        for (std::size_t k = 0; k < nb; ++k) {
            const std::size_t col = model.binaries[k];
            if (fix[k] < 0) {
                lo[col] = 0.0;
                hi[col] = 1.0;
            } else {
                lo[col] = hi[col] = static_cast<double>(fix[k]);
            }
        }
    };

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    std::size_t next_id = 0;
    open.push({-kInf, next_id++, std::vector<signed char>(nb, -1)});

    bool have_incumbent = false;
    double best_obj = kInf;
    std::vector<double> best_delta;
    std::size_t nodes = 0;
    bool limited = false;

    while (!open.empty()) {
        if (nodes >= node_limit) {
            limited = true;
            break;
        }
        Node node = open.top();
        open.pop();
        if (have_incumbent && node.bound >= best_obj - kPruneEps)
            continue;

        apply_fix(node.fix);
        LpSolution rel = lp_solve(model.lp, lo, hi);
        ++nodes;
        if (rel.status != LpStatus::optimal)
            continue; // infeasible subproblem
        if (have_incumbent && rel.value >= best_obj - kPruneEps)
            continue;

        // Most fractional unfixed indicator; ties to the lowest index.
        std::ptrdiff_t branch = -1;
        double best_frac = kIntEps;
        for (std::size_t k = 0; k < nb; ++k) {
            if (node.fix[k] >= 0)
                continue;
            const double z = rel.x[model.binaries[k]];
            const double frac = std::min(z, 1.0 - z);
            if (frac > best_frac) {
                best_frac = frac;
                branch = static_cast<std::ptrdiff_t>(k);
            }
        }

        if (branch < 0) { // integral
            have_incumbent = true;
            best_obj = rel.value;
            best_delta.assign(rel.x.begin(), rel.x.begin() + static_cast<std::ptrdiff_t>(n));
            continue;
        }

        for (signed char v : {static_cast<signed char>(0), static_cast<signed char>(1)}) {
            Node child{rel.value, next_id++, node.fix};
            child.fix[static_cast<std::size_t>(branch)] = v;
            open.push(std::move(child));
        }
    }

    sol.nodes = nodes;
    if (have_incumbent) {
        sol.status = limited ? MiloStatus::gap_limit : MiloStatus::optimal;
        sol.delta = best_delta;
        sol.point.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            sol.point[i] = model.completions[0][i] + best_delta[i];
        sol.objective = best_obj;
        sol.bound = sol.objective;
        if (limited && !open.empty())
            sol.bound = std::min(sol.bound, open.top().bound);
    } else if (limited) {
        sol.status = MiloStatus::gap_limit;
        sol.bound = open.empty() ? 0.0 : open.top().bound;
    } else {
        sol.status = MiloStatus::infeasible;
    }
    return sol;
}

} // namespace

MiloSolution solve_milo(const MiloProblem& prob, std::size_t node_limit) {
    const MiloModel model = encode(prob);
    MiloSolution sol = branch_and_bound(model, node_limit);
    if (!sol.delta.empty()) {
        sol.objective = 0.0;
        for (double d : sol.delta)
            sol.objective += std::abs(d);
        if (sol.status == MiloStatus::optimal)
            sol.bound = sol.objective;
    }
    return sol;
}

MiloSolution max_margin(const Classifier& clf, const Instance& anchor, int target,
                        const Box& box, std::size_t node_limit) {
    MiloProblem prob;
    prob.clf = &clf;
    prob.completions = {anchor};
    prob.target = target;
    prob.margin = 0.0;
    prob.box = box;
    MiloModel model = encode(prob);
    // Swap the objective: minimize -(2t-1) w2 . u over the single completion.
    const double sgn = target == 1 ? 1.0 : -1.0;
    std::fill(model.lp.objective.begin(), model.lp.objective.end(), 0.0);
    for (std::size_t j = 0; j < clf.hidden; ++j)
        model.lp.objective[model.u_col[0][j]] = -sgn * clf.w2[j];

    MiloSolution sol = branch_and_bound(model, node_limit);
    if (sol.status == MiloStatus::optimal || sol.status == MiloStatus::gap_limit) {
        if (!sol.point.empty()) {
            sol.objective = sgn * clf.score(sol.point);
            sol.bound = sol.objective;
        }
    }
    return sol;
}

MiloSolution solve_armin(const Classifier& clf, const std::vector<Instance>& completions,
                         int target, double margin, const Box& box, std::size_t node_limit) {
    if (completions.empty())
        throw error(errc::bad_argument, "solve_armin: at least one completion required");
    MiloProblem prob;
    prob.clf = &clf;
    prob.completions = completions;
    prob.target = target;
    prob.margin = margin;
    prob.box = box;
    return solve_milo(prob, node_limit);
}

std::string lp_text(const MiloModel& model) {
    const LinearProgram& lp = model.lp;
    auto name = [&](std::size_t col) -> std::string {
        if (col < model.n)
            return "d" + std::to_string(col);
        if (col < 2 * model.n)
            return "e" + std::to_string(col - model.n);
        for (std::size_t c = 0; c < model.u_col.size(); ++c)
            for (std::size_t j = 0; j < model.u_col[c].size(); ++j) {
                if (model.u_col[c][j] == col)
                    return "u" + std::to_string(c) + "_" + std::to_string(j);
                if (model.z_col[c][j] == static_cast<std::ptrdiff_t>(col))
                    return "z" + std::to_string(c) + "_" + std::to_string(j);
            }
        return "v" + std::to_string(col);
    };

    std::ostringstream out;
    out << "Minimize\n obj:";
    for (std::size_t j = 0; j < lp.n; ++j)
        if (lp.objective[j] != 0.0)
            out << " + " << lp.objective[j] << " " << name(j);
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        out << " c" << i << ":";
        for (std::size_t j = 0; j < lp.n; ++j) {
            const double a = lp.rows[i][j];
            if (a == 0.0)
                continue;
            out << (a >= 0.0 ? " + " : " - ") << std::abs(a) << " " << name(j);
        }
        const char* rel = lp.senses[i] == Sense::le ? "<=" : lp.senses[i] == Sense::ge ? ">=" : "=";
        out << " " << rel << " " << lp.rhs[i] << "\n";
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.n; ++j) {
        out << " " << lp.lo[j] << " <= " << name(j) << " <= ";
        if (std::isfinite(lp.hi[j]))
            out << lp.hi[j];
        else
            out << "+inf";
        out << "\n";
    }
    if (!model.binaries.empty()) {
        out << "Binaries\n";
        for (std::size_t col : model.binaries)
            out << " " << name(col);
        out << "\n";
    }
    out << "End\n";
    return out.str();
}

} // namespace cxbench
