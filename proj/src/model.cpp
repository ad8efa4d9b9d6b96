#include "cxbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cxbench/errors.hpp"
#include "cxbench/rng.hpp"

namespace cxbench {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

std::vector<double> Classifier::hidden_pre(std::span<const double> x) const {
    std::vector<double> a(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        double s = b1[j];
        const double* wrow = W1.data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i)
            s += wrow[i] * x[i];
        a[j] = s;
    }
    return a;
}

double Classifier::score(std::span<const double> x) const {
    double s = b2;
    for (std::size_t j = 0; j < hidden; ++j) {
        double a = b1[j];
        const double* wrow = W1.data() + j * n_in;
        for (std::size_t i = 0; i < n_in; ++i)
            a += wrow[i] * x[i];
        if (a > 0.0)
            s += w2[j] * a;
    }
    return s;
}

namespace {

void check_dims(const Classifier& clf, const Instance& x) {
    if (x.size() != clf.n_in)
        throw error(errc::dimension_mismatch, "instance has " + std::to_string(x.size()) +
                                                  " features, classifier expects " +
                                                  std::to_string(clf.n_in));
}

Classifier init_classifier(std::size_t n_in, const TrainConfig& cfg,
                           const std::vector<std::pair<double, double>>& norm_params) {
    Classifier clf;
    clf.n_in = n_in;
    clf.hidden = cfg.hidden_width;
    clf.seed = cfg.seed;
    clf.norm_params = norm_params;
    clf.W1.resize(clf.hidden * n_in);
    clf.b1.assign(clf.hidden, 0.0);
    clf.w2.resize(clf.hidden);
    clf.b2 = 0.0;

    auto rng = make_rng(cfg.seed);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(n_in + clf.hidden));
    const double lim2 = std::sqrt(6.0 / static_cast<double>(clf.hidden + 1));
    std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
    for (double& w : clf.W1)
        w = u1(rng);
    for (double& w : clf.w2)
        w = u2(rng);
    return clf;
}

} // namespace

Classifier train(const Dataset& ds, const TrainConfig& cfg) {
    if (ds.rows == 0)
        throw error(errc::no_usable_rows, "train: empty dataset");
    const bool has0 = std::any_of(ds.labels.begin(), ds.labels.end(), [](int l) { return l == 0; });
    const bool has1 = std::any_of(ds.labels.begin(), ds.labels.end(), [](int l) { return l == 1; });
    if (!has0 || !has1)
        throw error(errc::single_class, "train: training data contains a single class");
    if (cfg.hidden_width == 0 || cfg.batch_size == 0 || !(cfg.step_size > 0.0))
        throw error(errc::bad_argument, "train: hidden_width, batch_size, step_size must be positive");

    Classifier clf = init_classifier(ds.cols, cfg, ds.norm_params);
    auto rng = make_rng(derive_seed({cfg.seed, fnv1a("train-epochs")}));

    std::vector<std::size_t> order(ds.rows);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> gW1(clf.W1.size()), gb1(clf.hidden), gw2(clf.hidden);
    std::vector<double> act(clf.hidden);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < ds.rows; start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, ds.rows);
            const double inv = 1.0 / static_cast<double>(end - start);
            std::fill(gW1.begin(), gW1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            double gb2 = 0.0;

            for (std::size_t k = start; k < end; ++k) {
                auto x = ds.row(order[k]);
                double s = clf.b2;
                for (std::size_t j = 0; j < clf.hidden; ++j) {
                    double a = clf.b1[j];
                    const double* wrow = clf.W1.data() + j * clf.n_in;
                    for (std::size_t i = 0; i < clf.n_in; ++i)
                        a += wrow[i] * x[i];
                    act[j] = a > 0.0 ? a : 0.0;
                    s += clf.w2[j] * act[j];
                }
                const double err = sigmoid(s) - static_cast<double>(ds.labels[order[k]]);
                gb2 += err;
                for (std::size_t j = 0; j < clf.hidden; ++j) {
                    gw2[j] += err * act[j];
                    if (act[j] > 0.0) {
                        const double d = err * clf.w2[j];
                        gb1[j] += d;
                        double* grow = gW1.data() + j * clf.n_in;
                        for (std::size_t i = 0; i < clf.n_in; ++i)
                            grow[i] += d * x[i];
                    }
                }
            }

            const double lr = cfg.step_size * inv;
            for (std::size_t i = 0; i < clf.W1.size(); ++i)
                clf.W1[i] -= lr * gW1[i];
            for (std::size_t j = 0; j < clf.hidden; ++j) {
                clf.b1[j] -= lr * gb1[j];
                clf.w2[j] -= lr * gw2[j];
            }
            clf.b2 -= lr * gb2;
        }
    }
    return clf;
}

Prediction predict(const Classifier& clf, const Instance& x) {
    check_dims(clf, x);
    const double s = clf.score(x);
    return Prediction{s >= 0.0 ? 1 : 0, s};
}

std::vector<double> input_gradient(const Classifier& clf, const Instance& x) {
    check_dims(clf, x);
    std::vector<double> a = clf.hidden_pre(x);
    double s = clf.b2;
    for (std::size_t j = 0; j < clf.hidden; ++j)
        if (a[j] > 0.0)
            s += clf.w2[j] * a[j];
    const double p = sigmoid(s);
    const double dp = p * (1.0 - p);

    std::vector<double> g(clf.n_in, 0.0);
    for (std::size_t j = 0; j < clf.hidden; ++j) {
        if (a[j] <= 0.0)
            continue;
        const double c = dp * clf.w2[j];
        const double* wrow = clf.W1.data() + j * clf.n_in;
        for (std::size_t i = 0; i < clf.n_in; ++i)
            g[i] += c * wrow[i];
    }
    return g;
}

std::pair<double, double> interval_score(const Classifier& clf, const Instance& x,
                                         const WeightInterval& wi) {
    check_dims(clf, x);
    if (wi.radius < 0.0)
        throw error(errc::bad_argument, "interval_score: radius must be non-negative");
    const double r = wi.radius;

    auto mul = [](double wlo, double whi, double vlo, double vhi) {
        const double a = wlo * vlo, b = wlo * vhi, c = whi * vlo, d = whi * vhi;
        return std::pair<double, double>{std::min(std::min(a, b), std::min(c, d)),
                                         std::max(std::max(a, b), std::max(c, d))};
    };

    double lo = clf.b2 - r, hi = clf.b2 + r;
    for (std::size_t j = 0; j < clf.hidden; ++j) {
        double alo = clf.b1[j] - r, ahi = clf.b1[j] + r;
        const double* wrow = clf.W1.data() + j * clf.n_in;
        for (std::size_t i = 0; i < clf.n_in; ++i) {
            auto [plo, phi] = mul(wrow[i] - r, wrow[i] + r, x[i], x[i]);
            alo += plo;
            ahi += phi;
        }
        const double ulo = std::max(0.0, alo), uhi = std::max(0.0, ahi);
        auto [plo, phi] = mul(clf.w2[j] - r, clf.w2[j] + r, ulo, uhi);
        lo += plo;
        hi += phi;
    }
    return {lo, hi};
}

namespace {

std::vector<double> require_array(const nlohmann::json& j, const char* field, std::size_t n) {
    if (!j.contains(field))
        throw error(errc::bad_shape, std::string("model file missing field ") + field);
    const auto& arr = j.at(field);
    if (!arr.is_array())
        throw error(errc::bad_shape, std::string("model field ") + field + " is not an array");
    if (arr.size() != n)
        throw error(errc::bad_shape, std::string("model field ") + field + " has " +
                                         std::to_string(arr.size()) + " values, expected " +
                                         std::to_string(n));
    std::vector<double> out;
    out.reserve(n);
    for (const auto& v : arr) {
        if (!v.is_number())
            throw error(errc::bad_shape, std::string("model field ") + field + " has a non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace

void save(const Classifier& clf, const std::string& path) {
    nlohmann::json j;
    j["n"] = clf.n_in;
    j["hidden"] = clf.hidden;
    j["W1"] = clf.W1;
    j["b1"] = clf.b1;
    j["w2"] = clf.w2;
    j["b2"] = clf.b2;
    j["seed"] = clf.seed;
    nlohmann::json np = nlohmann::json::array();
    for (auto [mn, mx] : clf.norm_params)
        np.push_back({mn, mx});
    j["norm_params"] = np;

    std::ofstream out(path);
    if (!out)
        throw error(errc::missing_file, "cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

Classifier load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw error(errc::missing_file, "cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("malformed model file: ") + e.what());
    }

    Classifier clf;
    try {
        clf.n_in = j.at("n").get<std::size_t>();
        clf.hidden = j.at("hidden").get<std::size_t>();
        clf.b2 = j.at("b2").get<double>();
        clf.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("malformed model file: ") + e.what());
    }
    if (clf.n_in == 0 || clf.hidden == 0)
        throw error(errc::bad_shape, "model file has zero input or hidden width");

    clf.W1 = require_array(j, "W1", clf.hidden * clf.n_in);
    clf.b1 = require_array(j, "b1", clf.hidden);
    clf.w2 = require_array(j, "w2", clf.hidden);

    if (j.contains("norm_params")) {
        const auto& np = j.at("norm_params");
        if (!np.is_array() || (np.size() != clf.n_in && !np.empty()))
            throw error(errc::bad_shape, "model field norm_params has wrong shape");
        for (const auto& pair : np) {
            if (!pair.is_array() || pair.size() != 2)
                throw error(errc::bad_shape, "model field norm_params entries must be [min, max]");
            clf.norm_params.emplace_back(pair[0].get<double>(), pair[1].get<double>());
        }
    }
    return clf;
}

double mean_bce_loss(const Classifier& clf, const Dataset& ds) {
    double total = 0.0;
    for (std::size_t i = 0; i < ds.rows; ++i) {
        const double p = sigmoid(clf.score(ds.row(i)));
        const double eps = 1e-12;
        const double y = static_cast<double>(ds.labels[i]);
        total += -(y * std::log(std::max(p, eps)) + (1.0 - y) * std::log(std::max(1.0 - p, eps)));
    }
    return total / static_cast<double>(ds.rows);
}

double accuracy(const Classifier& clf, const Dataset& ds) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.rows; ++i)
        hits += clf.predict_class(ds.row(i)) == ds.labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(ds.rows);
}

} // namespace cxbench
