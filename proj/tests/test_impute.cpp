#include <doctest.h>

#include "cxbench/errors.hpp"
#include "cxbench/impute.hpp"
#include "cxbench/rng.hpp"
#include "support/oracles.hpp"

using namespace cxbench;

namespace {

Dataset make_dataset(std::vector<std::vector<double>> rows) {
    Dataset ds;
    ds.rows = rows.size();
    ds.cols = rows.front().size();
    ds.labels.assign(ds.rows, 0);
    ds.norm_params.assign(ds.cols, {0.0, 1.0});
    for (auto& r : rows)
        ds.features.insert(ds.features.end(), r.begin(), r.end());
    return ds;
}

IncompleteInstance obs(std::vector<double> values) {
    IncompleteInstance o;
    o.values = std::move(values);
    return o;
}

constexpr double kMiss = std::numeric_limits<double>::quiet_NaN();

} // namespace

TEST_CASE("simple imputer stores column means") {
    Dataset ds = make_dataset({{0, 0}, {1, 1}});
    Imputer imp = Imputer::fit(ImputerKind::simple, ds);
    CHECK(imp.column_means() == std::vector<double>{0.5, 0.5});

    const Imputed out = imp.impute(obs({kMiss, 0.3}));
    CHECK(out.x[0] == doctest::Approx(0.5));
    CHECK(out.x[1] == 0.3);
}

TEST_CASE("simple imputer fills only the gaps") {
    Dataset ds = make_dataset({{0.4, 0.6}, {0.4, 0.6}});
    Imputer imp = Imputer::fit(ImputerKind::simple, ds);
    const Imputed out = imp.impute(obs({kMiss, 0.3}));
    CHECK(out.x == Instance{0.4, 0.3});
}

TEST_CASE("knn fit preconditions") {
    Dataset two = make_dataset({{0, 0}, {1, 1}});
    ImputerParams p;
    p.knn_k = 1;
    CHECK_NOTHROW(Imputer::fit(ImputerKind::knn, two, p));
    p.knn_k = 3;
    CHECK_THROWS_AS(Imputer::fit(ImputerKind::knn, two, p), error);
    CHECK_THROWS_AS(Imputer::fit(ImputerKind::simple, Dataset{}, ImputerParams{}), error);
}

TEST_CASE("knn k=1 copies the nearest row's coordinate") {
    Dataset ds = make_dataset({{0, 0}, {1, 1}});
    ImputerParams p;
    p.knn_k = 1;
    Imputer imp = Imputer::fit(ImputerKind::knn, ds, p);
    const Imputed out = imp.impute(obs({0.9, kMiss}));
    CHECK(out.x[0] == 0.9);
    CHECK(out.x[1] == doctest::Approx(1.0));
    CHECK_FALSE(out.mean_fallback);
}

TEST_CASE("knn with every coordinate missing falls back to means") {
    Dataset ds = make_dataset({{0, 0}, {1, 1}});
    ImputerParams p;
    p.knn_k = 1;
    Imputer imp = Imputer::fit(ImputerKind::knn, ds, p);
    const Imputed out = imp.impute(obs({kMiss, kMiss}));
    CHECK(out.mean_fallback);
    CHECK(out.x == Instance{0.5, 0.5});
}

TEST_CASE("knn matches the brute-force oracle") {
    auto rng = make_rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n_rows = 40, n_cols = 5;

    std::vector<std::vector<double>> rows(n_rows, std::vector<double>(n_cols));
    for (auto& r : rows)
        for (double& v : r)
            v = u(rng);
    Dataset ds = make_dataset(rows);
    ImputerParams p;
    p.knn_k = 5;
    Imputer imp = Imputer::fit(ImputerKind::knn, ds, p);

    for (std::size_t trial = 0; trial < 1000; ++trial) {
        std::vector<double> values(n_cols);
        std::vector<bool> missing(n_cols, false);
        const std::size_t n_missing = 1 + trial % (n_cols - 1);
        for (double& v : values)
            v = u(rng);
        std::vector<std::size_t> idx(n_cols);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        IncompleteInstance o = obs(values);
        for (std::size_t i = 0; i < n_missing; ++i) {
            missing[idx[i]] = true;
            o.values[idx[i]] = kMiss;
        }
        const Imputed out = imp.impute(o);
        for (std::size_t j = 0; j < n_cols; ++j) {
            if (!missing[j]) {
                CHECK(out.x[j] == values[j]);
                continue;
            }
            const double expect = oracles::knn_fill_direct(rows, values, missing, j, p.knn_k);
            CHECK(out.x[j] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("mice learns an exact linear relation") {
    // y = 2x sampled on a grid; OLS must recover slope 2.
    std::vector<std::vector<double>> rows;
    for (int i = 0; i <= 10; ++i) {
        const double x = 0.05 * i;
        rows.push_back({x, 2.0 * x});
    }
    Dataset ds = make_dataset(rows);
    Imputer imp = Imputer::fit(ImputerKind::mice, ds);
    CHECK(imp.regression_coef(1)[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(imp.regression_intercept(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    const Imputed out = imp.impute(obs({0.4, kMiss}));
    CHECK(out.x[1] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("imputing a complete instance is the identity for all kinds") {
    Dataset ds = make_dataset({{0.1, 0.9, 0.3}, {0.5, 0.2, 0.8}, {0.7, 0.4, 0.1}});
    ImputerParams p;
    p.knn_k = 2;
    const Instance x{0.25, 0.5, 0.75};
    for (ImputerKind kind : {ImputerKind::simple, ImputerKind::knn, ImputerKind::mice}) {
        Imputer imp = Imputer::fit(kind, ds, p);
        CHECK(imp.impute(obs(x)).x == x);
    }
}

TEST_CASE("observed coordinates are never altered") {
    auto rng = make_rng(555);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> rows(30, std::vector<double>(4));
    for (auto& r : rows)
        for (double& v : r)
            v = u(rng);
    Dataset ds = make_dataset(rows);
    ImputerParams p;
    p.knn_k = 3;

    for (ImputerKind kind : {ImputerKind::simple, ImputerKind::knn, ImputerKind::mice}) {
        Imputer imp = Imputer::fit(kind, ds, p);
        for (std::size_t trial = 0; trial < 200; ++trial) {
            IncompleteInstance o = obs({u(rng), u(rng), u(rng), u(rng)});
            const Instance orig = o.values;
            const std::size_t drop = trial % 4;
            o.values[drop] = kMiss;
            const Imputed out = imp.impute(o);
            for (std::size_t j = 0; j < 4; ++j)
                if (j != drop)
                    CHECK(out.x[j] == orig[j]);
        }
    }
}

TEST_CASE("mice sweep change trace settles") {
    // Three mutually correlated features so the chained sweep iterates.
    auto rng = make_rng(77);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < 60; ++i) {
        const double base = u(rng);
        rows.push_back({base + noise(rng), 0.8 * base + noise(rng), 0.5 * base + noise(rng)});
    }
    Dataset ds = make_dataset(rows);
    ImputerParams p;
    p.mice_tol = 1e-12; // force a full-length trace
    p.mice_max_iter = 10;
    Imputer imp = Imputer::fit(ImputerKind::mice, ds, p);

    std::vector<double> trace;
    imp.impute(obs({0.7, kMiss, kMiss}), &trace);
    REQUIRE(trace.size() >= 3);
    for (std::size_t i = trace.size() - 3; i + 1 < trace.size(); ++i)
        CHECK(trace[i + 1] <= trace[i] + 1e-15);
}

TEST_CASE("impute_multi draw semantics") {
    std::vector<std::vector<double>> rows;
    auto rng = make_rng(31);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (std::size_t i = 0; i < 50; ++i) {
        const double x = u(rng);
        rows.push_back({x, 2.0 * x});
    }
    Dataset ds = make_dataset(rows);
    Imputer imp = Imputer::fit(ImputerKind::mice, ds);

    SUBCASE("J=1 equals the deterministic completion") {
        const auto multi = imp.impute_multi(obs({0.4, kMiss}), 1, 9);
        REQUIRE(multi.size() == 1);
        CHECK(multi[0] == imp.impute(obs({0.4, kMiss})).x);
    }
    SUBCASE("complete input gives identical copies") {
        const auto multi = imp.impute_multi(obs({0.4, 0.8}), 4, 9);
        REQUIRE(multi.size() == 4);
        for (const auto& m : multi)
            CHECK(m == Instance{0.4, 0.8});
    }
    SUBCASE("bootstrap draws stay close on exact linear data") {
        const auto multi = imp.impute_multi(obs({0.4, kMiss}), 5, 9);
        REQUIRE(multi.size() == 5);
        for (const auto& m : multi) {
            CHECK(m[0] == 0.4);
            CHECK(m[1] == doctest::Approx(0.8).epsilon(0.0625));
        }
    }
    SUBCASE("deterministic per seed") {
        const auto a = imp.impute_multi(obs({0.4, kMiss}), 5, 9);
        const auto b = imp.impute_multi(obs({0.4, kMiss}), 5, 9);
        CHECK(a == b);
    }
    SUBCASE("requires mice") {
        Imputer simple = Imputer::fit(ImputerKind::simple, ds);
        CHECK_THROWS_AS(simple.impute_multi(obs({0.4, kMiss}), 3, 1), error);
    }
}
