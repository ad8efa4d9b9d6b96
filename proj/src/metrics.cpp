#include "cxbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cxbench/errors.hpp"

namespace cxbench {

namespace {
constexpr double kDensityCap = 1e12;
}

LocalOutlierFactor::LocalOutlierFactor(const Dataset& reference, std::size_t k_neighbors)
    : k_(k_neighbors), cols_(reference.cols), points_(reference.features),
      count_(reference.rows) {
    if (k_ < 1 || k_ >= count_)
        throw error(errc::bad_argument, "lof: need 1 <= k < reference rows");

    k_dist_.resize(count_);
    neighbors_.resize(count_);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(count_ - 1);
    for (std::size_t i = 0; i < count_; ++i) {
        dist.clear();
        const double* pi = points_.data() + i * cols_;
        for (std::size_t j = 0; j < count_; ++j) {
            if (j == i)
                continue;
            dist.emplace_back(distance(pi, points_.data() + j * cols_), j);
        }
        std::sort(dist.begin(), dist.end());
        k_dist_[i] = dist[k_ - 1].first;
        for (const auto& [d, j] : dist) {
            if (d > k_dist_[i])
                break;
            neighbors_[i].push_back(j);
        }
    }

    lrd_.resize(count_);
    for (std::size_t i = 0; i < count_; ++i) {
        const double* pi = points_.data() + i * cols_;
        double reach_sum = 0.0;
        for (std::size_t o : neighbors_[i])
            reach_sum += std::max(k_dist_[o], distance(pi, points_.data() + o * cols_));
        lrd_[i] = reach_sum > 0.0
                      ? std::min(static_cast<double>(neighbors_[i].size()) / reach_sum, kDensityCap)
                      : kDensityCap;
    }
}

double LocalOutlierFactor::distance(const double* a, const double* b) const {
    double d2 = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
        const double diff = a[j] - b[j];
        d2 += diff * diff;
    }
    return std::sqrt(d2);
}

double LocalOutlierFactor::score(const Instance& query) const {
    if (query.size() != cols_)
        throw error(errc::dimension_mismatch, "lof: query dimension mismatch");

    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(count_);
    for (std::size_t j = 0; j < count_; ++j)
        dist.emplace_back(distance(query.data(), points_.data() + j * cols_), j);
    std::sort(dist.begin(), dist.end());

    const double q_kdist = dist[k_ - 1].first;
    double reach_sum = 0.0;
    double lrd_neighbor_sum = 0.0;
    std::size_t n_neigh = 0;
    for (const auto& [d, o] : dist) {
        if (d > q_kdist)
            break;
        reach_sum += std::max(k_dist_[o], d);
        lrd_neighbor_sum += lrd_[o];
        ++n_neigh;
    }
    const double lrd_q =
        reach_sum > 0.0 ? std::min(static_cast<double>(n_neigh) / reach_sum, kDensityCap)
                        : kDensityCap;
    const double lof = lrd_neighbor_sum / (static_cast<double>(n_neigh) * lrd_q);
    return -lof;
}

double vcx(const Classifier& clf, std::span<const Explanation> explanations,
           std::span<const int> targets) {
    if (explanations.empty())
        throw error(errc::bad_argument, "vcx: empty batch");
    if (explanations.size() != targets.size())
        throw error(errc::dimension_mismatch, "vcx: explanations/targets length mismatch");

    std::size_t hits = 0;
    for (std::size_t i = 0; i < explanations.size(); ++i)
        hits += clf.predict_class(explanations[i].x_prime) == targets[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(explanations.size());
}

double vrc(const Classifier& clf, std::span<const Instance> true_inputs,
           std::span<const Explanation> explanations, std::span<const int> targets,
           std::size_t* clipped_count) {
    if (explanations.empty())
        throw error(errc::bad_argument, "vrc: empty batch");
    if (explanations.size() != targets.size() || explanations.size() != true_inputs.size())
        throw error(errc::dimension_mismatch, "vrc: batch length mismatch");

    std::size_t hits = 0, clipped = 0;
    Instance applied;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        const Instance& x = true_inputs[i];
        const auto& delta = explanations[i].delta;
        applied.resize(x.size());
        bool any_clip = false;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = x[j] + delta[j];
            const double c = std::clamp(v, 0.0, 1.0);
            any_clip |= c != v;
            applied[j] = c;
        }
        clipped += any_clip ? 1 : 0;
        hits += clf.predict_class(applied) == targets[i] ? 1 : 0;
    }
    if (clipped_count)
        *clipped_count = clipped;
    return static_cast<double>(hits) / static_cast<double>(explanations.size());
}

std::pair<double, double> cost(std::span<const Instance> true_inputs,
                               std::span<const Explanation> explanations) {
    if (explanations.empty())
        throw error(errc::bad_argument, "cost: empty batch");
    if (explanations.size() != true_inputs.size())
        throw error(errc::dimension_mismatch, "cost: batch length mismatch");

    std::vector<double> d(explanations.size());
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < true_inputs[i].size(); ++j)
            s += std::abs(explanations[i].x_prime[j] - true_inputs[i][j]);
        d[i] = s;
    }
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0.0;
    for (double v : d)
        var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.size());
    return {mean, std::sqrt(var)};
}

namespace {

// Midranks of the pooled sample; returns (rank sum of sample a, sum of t^3-t
// over tie groups).
std::pair<double, double> rank_sum_a(std::span<const double> a, std::span<const double> b) {
    struct Entry {
        double v;
        bool from_a;
    };
    std::vector<Entry> pool;
    pool.reserve(a.size() + b.size());
    for (double v : a)
        pool.push_back({v, true});
    for (double v : b)
        pool.push_back({v, false});
    std::sort(pool.begin(), pool.end(), [](const Entry& x, const Entry& y) { return x.v < y.v; });

    double ra = 0.0, tie_sum = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].v == pool[i].v)
            ++j;
        const double t = static_cast<double>(j - i);
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (pool[k].from_a)
                ra += midrank;
        if (t > 1.0)
            tie_sum += t * t * t - t;
        i = j;
    }
    return {ra, tie_sum};
}

bool pooled_tie_free(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pool(a.begin(), a.end());
    pool.insert(pool.end(), b.begin(), b.end());
    std::sort(pool.begin(), pool.end());
    return std::adjacent_find(pool.begin(), pool.end()) == pool.end();
}

double u_statistic(std::span<const double> a, std::span<const double> b) {
    const auto [ra, tie_sum] = rank_sum_a(a, b);
    (void)tie_sum;
    const double na = static_cast<double>(a.size());
    return ra - na * (na + 1.0) / 2.0;
}

} // namespace

double mwu_exact_p(std::span<const double> a, std::span<const double> b) {
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    const double mu = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
    const double dev = std::abs(u_statistic(a, b) - mu);

    // Enumerate every assignment of ranks 1..n to sample a.
    std::vector<std::size_t> comb(na);
    std::iota(comb.begin(), comb.end(), 1);
    std::size_t total = 0, extreme = 0;
    while (true) {
        double ra = 0.0;
        for (std::size_t r : comb)
            ra += static_cast<double>(r);
        const double u = ra - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;
        ++total;
        if (std::abs(u - mu) >= dev - 1e-9)
            ++extreme;

        // Next combination in lexicographic order.
        std::size_t i = na;
        while (i-- > 0) {
            if (comb[i] < n - (na - 1 - i)) {
                ++comb[i];
                for (std::size_t j = i + 1; j < na; ++j)
                    comb[j] = comb[j - 1] + 1;
                break;
            }
            if (i == 0)
                return static_cast<double>(extreme) / static_cast<double>(total);
        }
    }
}

double mwu_normal_p(std::span<const double> a, std::span<const double> b) {
    const auto [ra, tie_sum] = rank_sum_a(a, b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;
    const double u = ra - na * (na + 1.0) / 2.0;
    const double mu = na * nb / 2.0;

    double var = na * nb / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if (var <= 0.0)
        return 1.0;
    const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        throw error(errc::bad_argument, "mann_whitney_u: empty sample");

    MwuResult res;
    res.u = u_statistic(a, b);
    if (a.size() + b.size() <= 12 && pooled_tie_free(a, b))
        res.p_two_sided = mwu_exact_p(a, b);
    else
        res.p_two_sided = mwu_normal_p(a, b);
    return res;
}

double median(std::vector<double> values) {
    if (values.empty())
        throw error(errc::bad_argument, "median: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw error(errc::bad_argument, "quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - std::floor(h);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace cxbench
