#include "cxbench/explain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cxbench/errors.hpp"
#include "cxbench/rng.hpp"

namespace cxbench {

const char* method_name(Method m) {
    switch (m) {
    case Method::wachter: return "wachter";
    case Method::bls: return "bls";
    case Method::kdtreennce: return "kdtreennce";
    case Method::mce: return "mce";
    case Method::armin: return "armin";
    case Method::mcer: return "mcer";
    case Method::rnce: return "rnce";
    case Method::proplace: return "proplace";
    case Method::stce: return "stce";
    case Method::apas: return "apas";
    }
    return "unknown";
}

bool parse_method(const std::string& name, Method& out) {
    static const std::pair<const char*, Method> table[] = {
        {"wachter", Method::wachter}, {"bls", Method::bls},
        {"kdtreennce", Method::kdtreennce}, {"mce", Method::mce},
        {"armin", Method::armin}, {"mcer", Method::mcer},
        {"rnce", Method::rnce}, {"proplace", Method::proplace},
        {"stce", Method::stce}, {"apas", Method::apas},
    };
    for (const auto& [n, m] : table)
        if (name == n) {
            out = m;
            return true;
        }
    return false;
}

bool method_is_robust(Method m) {
    switch (m) {
    case Method::mcer:
    case Method::rnce:
    case Method::proplace:
    case Method::stce:
    case Method::apas:
        return true;
    default:
        return false;
    }
}

const char* status_name(ExplainStatus s) {
    switch (s) {
    case ExplainStatus::valid: return "valid";
    case ExplainStatus::not_converged: return "not_converged";
    case ExplainStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Explanation finish(Instance x_prime, const Instance& anchor, int target, Method method,
                   ExplainStatus status, Clock::time_point start) {
    Explanation ex;
    ex.delta.resize(anchor.size());
    for (std::size_t i = 0; i < anchor.size(); ++i)
        ex.delta[i] = x_prime[i] - anchor[i];
    ex.x_prime = std::move(x_prime);
    ex.target = target;
    ex.method = method;
    ex.status = status;
    ex.solve_ms = elapsed_ms(start);
    return ex;
}

Instance clip_to_box(Instance x, const Box& box) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], box[i].first, box[i].second);
    return x;
}

double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

// Shared descent for wachter (single member) and apas (sampled set). The
// validity term is the worst member; the stop rule requires every member to
// clear the confidence margin.
Explanation margin_descent(const std::vector<const Classifier*>& members, const Instance& anchor,
                           int target, const WachterParams& params, const Box& box,
                           Method method) {
    const auto start = Clock::now();
    if (members.empty())
        throw error(errc::bad_argument, "margin_descent: empty model set");
    if (!(params.lambda >= 0.0 && params.lambda <= 1.0) || !(params.eps > 0.0) ||
        !(params.lr > 0.0))
        throw error(errc::bad_argument, "wachter params: lambda in [0,1], eps > 0, lr > 0");
    const double t = static_cast<double>(target);

    auto margin_met = [&](const Instance& x) {
        for (const Classifier* m : members) {
            const double p = sigmoid(m->score(x));
            if (target == 1 ? p < 0.5 + params.eps : p > 0.5 - params.eps)
                return false;
        }
        return true;
    };
    auto worst_member = [&](const Instance& x) {
        std::size_t arg = 0;
        double worst = -1.0;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const double p = sigmoid(members[m]->score(x));
            const double gap = (p - t) * (p - t);
            if (gap > worst) {
                worst = gap;
                arg = m;
            }
        }
        return std::pair<std::size_t, double>{arg, worst};
    };

    Instance x = clip_to_box(anchor, box);
    if (margin_met(x))
        return finish(std::move(x), anchor, target, method, ExplainStatus::valid, start);

    Instance best = x;
    double best_gap = worst_member(x).second;

    for (std::size_t it = 0; it < params.max_iter; ++it) {
        const auto [arg, gap] = worst_member(x);
        const Classifier& m = *members[arg];
        const double p = sigmoid(m.score(x));
        std::vector<double> vg = input_gradient(m, x);
        const double vcoef = (1.0 - params.lambda) * 2.0 * (p - t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = params.lambda * sign(x[i] - anchor[i]) + vcoef * vg[i];
            x[i] = std::clamp(x[i] - params.lr * g, box[i].first, box[i].second);
        }
        const double new_gap = worst_member(x).second;
        if (new_gap < best_gap) {
            best_gap = new_gap;
            best = x;
        }
        if (margin_met(x))
            return finish(std::move(x), anchor, target, method, ExplainStatus::valid, start);
    }
    return finish(std::move(best), anchor, target, method, ExplainStatus::not_converged, start);
}

std::vector<std::size_t> target_rows_by_distance(const Classifier& clf, const Dataset& train,
                                                 const Instance& anchor, int target) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < train.rows; ++i) {
        if (clf.predict_class(train.row(i)) != target)
            continue;
        auto r = train.row(i);
        double d = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j)
            d += std::abs(r[j] - anchor[j]);
        cand.emplace_back(d, i);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<std::size_t> idx;
    idx.reserve(cand.size());
    for (const auto& [d, i] : cand)
        idx.push_back(i);
    return idx;
}

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, lambda = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        css += u[j];
        const double cand = (1.0 - css) / static_cast<double>(j + 1);
        if (u[j] + cand > 0.0) {
            rho = j;
            lambda = cand;
        }
    }
    (void)rho;
    for (double& w : v)
        w = std::max(w + lambda, 0.0);
    return v;
}

} // namespace

Explanation wachter(const Classifier& clf, const Instance& anchor, int target,
                    const WachterParams& params, const Box& box) {
    return margin_descent({&clf}, anchor, target, params, box, Method::wachter);
}

Explanation bls(const Classifier& clf, const Dataset& train, const Instance& anchor, int target,
                std::uint64_t seed, double margin) {
    const auto start = Clock::now();
    if (clf.predict_class(anchor) == target)
        return finish(anchor, anchor, target, Method::bls, ExplainStatus::valid, start);

    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < train.rows; ++i)
        if (clf.predict_class(train.row(i)) == target)
            cand.push_back(i);
    if (cand.empty())
        return finish(anchor, anchor, target, Method::bls, ExplainStatus::infeasible, start);

    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
    const Instance plus = train.instance(cand[pick(rng)]);

    const double sgn = target == 1 ? 1.0 : -1.0;
    auto g = [&](double alpha) {
        Instance p(anchor.size());
        for (std::size_t i = 0; i < p.size(); ++i)
            p[i] = anchor[i] + alpha * (plus[i] - anchor[i]);
        return sgn * clf.score(p);
    };

    const double tau = std::min(margin, g(1.0));
    double a = 0.0, b = 1.0;
    while (b - a > 1e-6) {
        const double mid = 0.5 * (a + b);
        if (g(mid) >= tau)
            b = mid;
        else
            a = mid;
    }
    Instance x(anchor.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = anchor[i] + b * (plus[i] - anchor[i]);
    return finish(std::move(x), anchor, target, Method::bls, ExplainStatus::valid, start);
}

Explanation nnce(const Classifier& clf, const Dataset& train, const Instance& anchor, int target,
                 const NnceFilter& filter) {
    const auto start = Clock::now();
    const Method method = filter.kind == NnceFilter::Kind::none        ? Method::kdtreennce
                          : filter.kind == NnceFilter::Kind::certified ? Method::rnce
                                                                       : Method::stce;

    auto passes = [&](const Instance& x) {
        switch (filter.kind) {
        case NnceFilter::Kind::none:
            return true;
        case NnceFilter::Kind::certified:
            return certify(clf, x, target, filter.radius);
        case NnceFilter::Kind::ensemble: {
            if (!filter.models)
                throw error(errc::bad_argument, "nnce: ensemble filter without model set");
            for (const Classifier& m : filter.models->members)
                if (m.predict_class(x) != target)
                    return false;
            return true;
        }
        case NnceFilter::Kind::stable:
            return stability_score(clf, x, filter.stability, filter.seed) >= filter.stability.tau;
        }
        return false;
    };

    for (std::size_t i : target_rows_by_distance(clf, train, anchor, target)) {
        Instance x = train.instance(i);
        if (passes(x))
            return finish(std::move(x), anchor, target, method, ExplainStatus::valid, start);
    }
    return finish(anchor, anchor, target, method, ExplainStatus::infeasible, start);
}

Explanation milo_explain(const Classifier& clf, const Instance& anchor, int target,
                         const MiloMode& mode, const Box& box) {
    const auto start = Clock::now();
    const Method method = mode.kind == MiloMode::Kind::mce    ? Method::mce
                          : mode.kind == MiloMode::Kind::mcer ? Method::mcer
                                                              : Method::armin;

    MiloProblem prob;
    prob.clf = &clf;
    prob.target = target;
    prob.box = box;
    prob.margin = mode.theta;
    prob.completions =
        mode.kind == MiloMode::Kind::armin ? mode.completions : std::vector<Instance>{anchor};
    if (prob.completions.empty())
        throw error(errc::bad_argument, "milo_explain: armin requires completions");

    auto to_explanation = [&](const MiloSolution& s) {
        switch (s.status) {
        case MiloStatus::optimal:
            return finish(s.point, anchor, target, method, ExplainStatus::valid, start);
        case MiloStatus::gap_limit:
            return s.point.empty()
                       ? finish(anchor, anchor, target, method, ExplainStatus::infeasible, start)
                       : finish(s.point, anchor, target, method, ExplainStatus::valid, start);
        case MiloStatus::infeasible:
        default:
            return finish(anchor, anchor, target, method, ExplainStatus::infeasible, start);
        }
    };

    if (mode.kind != MiloMode::Kind::mcer)
        return to_explanation(solve_milo(prob));

    // MCER: smallest theta (within theta_tol) whose optimum certifies. The
    // bisection ceiling is theta_max capped at the largest margin the box
    // admits, otherwise a tight box would make every instance look infeasible.
    auto solve_at = [&](double theta) {
        prob.margin = theta;
        return solve_milo(prob);
    };
    MiloSolution lo_sol = solve_at(mode.theta);
    if (lo_sol.status != MiloStatus::optimal)
        return to_explanation(lo_sol);
    if (certify(clf, lo_sol.point, target, mode.radius))
        return finish(lo_sol.point, anchor, target, method, ExplainStatus::valid, start);

    const MiloSolution peak = max_margin(clf, anchor, target, box);
    if (peak.status != MiloStatus::optimal)
        return finish(anchor, anchor, target, method, ExplainStatus::infeasible, start);
    const double theta_cap = std::min(mode.theta_max, peak.objective);

    MiloSolution hi_sol = solve_at(theta_cap);
    if (hi_sol.status != MiloStatus::optimal ||
        !certify(clf, hi_sol.point, target, mode.radius))
        return finish(anchor, anchor, target, method, ExplainStatus::infeasible, start);

    double lo = mode.theta, hi = theta_cap;
    while (hi - lo > mode.theta_tol) {
        const double mid = 0.5 * (lo + hi);
        MiloSolution mid_sol = solve_at(mid);
        if (mid_sol.status == MiloStatus::optimal &&
            certify(clf, mid_sol.point, target, mode.radius)) {
            hi = mid;
            hi_sol = std::move(mid_sol);
        } else {
            lo = mid;
        }
    }
    return finish(hi_sol.point, anchor, target, method, ExplainStatus::valid, start);
}

Explanation proplace(const Classifier& clf, const Dataset& train, const Instance& anchor,
                     int target, double radius, std::size_t k, const Box& box,
                     std::size_t steps, double step_size) {
    const auto start = Clock::now();
    (void)box; // candidates are training rows, already inside the data domain
    if (k < 1)
        throw error(errc::bad_argument, "proplace: k must be >= 1");

    if (certify(clf, anchor, target, radius))
        return finish(anchor, anchor, target, Method::proplace, ExplainStatus::valid, start);

    std::vector<Instance> verts;
    for (std::size_t i : target_rows_by_distance(clf, train, anchor, target)) {
        Instance x = train.instance(i);
        if (certify(clf, x, target, radius)) {
            verts.push_back(std::move(x));
            if (verts.size() == k)
                break;
        }
    }
    if (verts.empty())
        return finish(anchor, anchor, target, Method::proplace, ExplainStatus::infeasible, start);

    const std::size_t n = anchor.size();
    auto combine = [&](const std::vector<double>& w) {
        Instance y(n, 0.0);
        for (std::size_t v = 0; v < verts.size(); ++v)
            for (std::size_t j = 0; j < n; ++j)
                y[j] += w[v] * verts[v][j];
        return y;
    };
    auto l1_to_anchor = [&](const Instance& y) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            d += std::abs(y[j] - anchor[j]);
        return d;
    };

    std::vector<double> w(verts.size(), 1.0 / static_cast<double>(verts.size()));
    Instance best = combine(w);
    double best_obj = l1_to_anchor(best);
    for (std::size_t it = 0; it < steps; ++it) {
        const Instance y = combine(w);
        std::vector<double> grad(verts.size(), 0.0);
        for (std::size_t v = 0; v < verts.size(); ++v)
            for (std::size_t j = 0; j < n; ++j)
                grad[v] += verts[v][j] * sign(y[j] - anchor[j]);
        for (std::size_t v = 0; v < verts.size(); ++v)
            w[v] -= step_size * grad[v];
        w = project_simplex(std::move(w));
        const Instance y2 = combine(w);
        const double obj = l1_to_anchor(y2);
        if (obj < best_obj) {
            best_obj = obj;
            best = y2;
        }
    }

    if (!certify(clf, best, target, radius)) {
        // Bisect toward the nearest certified vertex.
        const Instance& vstar = verts.front();
        double a = 0.0, b = 1.0;
        auto at = [&](double alpha) {
            Instance p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = best[j] + alpha * (vstar[j] - best[j]);
            return p;
        };
        while (b - a > 1e-6) {
            const double mid = 0.5 * (a + b);
            if (certify(clf, at(mid), target, radius))
                b = mid;
            else
                a = mid;
        }
        best = at(b);
    }

    if (l1_to_anchor(best) > l1_to_anchor(verts.front()))
        best = verts.front();
    return finish(std::move(best), anchor, target, Method::proplace, ExplainStatus::valid, start);
}

Explanation apas(const Classifier& clf, const Instance& anchor, int target,
                 const ModelSet& models, const WachterParams& params, const Box& box) {
    (void)clf;
    if (models.members.empty())
        throw error(errc::bad_argument, "apas: empty model set");
    std::vector<const Classifier*> members;
    members.reserve(models.members.size());
    for (const Classifier& m : models.members)
        members.push_back(&m);
    Explanation ex = margin_descent(members, anchor, target, params, box, Method::apas);
    return ex;
}

} // namespace cxbench
