#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "cxbench/dataset.hpp"
#include "cxbench/errors.hpp"

using namespace cxbench;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& content) {
        static int counter = 0;
        path = "test_dataset_tmp_" + std::to_string(counter++) + ".csv";
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("ingest normalizes features column-wise") {
    TempCsv csv("a,target\n0,0\n5,5\n10,10\n");
    Dataset ds = ingest_csv(csv.path, "target", 0.5);
    REQUIRE(ds.rows == 3);
    REQUIRE(ds.cols == 1);
    CHECK(ds.at(0, 0) == doctest::Approx(0.0));
    CHECK(ds.at(1, 0) == doctest::Approx(0.5));
    CHECK(ds.at(2, 0) == doctest::Approx(1.0));
    CHECK(ds.norm_params[0] == std::pair<double, double>{0.0, 10.0});
}

TEST_CASE("target binarization at the threshold, ties to class 1") {
    // Raw targets normalize to 0.2 / 0.5 / 0.9 / 0.0 / 1.0.
    TempCsv csv("a,target\n1,2\n2,5\n3,9\n4,0\n5,10\n");
    Dataset ds = ingest_csv(csv.path, "target", 0.5);
    REQUIRE(ds.rows == 5);
    CHECK(ds.labels == std::vector<int>{0, 1, 1, 0, 1});
}

TEST_CASE("constant feature column normalizes to zeros") {
    TempCsv csv("a,b,target\n7,1,0\n7,2,1\n7,3,2\n");
    Dataset ds = ingest_csv(csv.path, "target", 0.5);
    for (std::size_t i = 0; i < ds.rows; ++i)
        CHECK(ds.at(i, 0) == 0.0);
}

TEST_CASE("rows with unparseable or empty cells are dropped and counted") {
    TempCsv csv("a,target\n1,1\nxyz,2\n3,\n4,4\n");
    Dataset ds = ingest_csv(csv.path, "target", 0.5);
    CHECK(ds.rows == 2);
    CHECK(ds.dropped_rows == 2);
}

TEST_CASE("ingest error codes") {
    SUBCASE("missing file") {
        try {
            ingest_csv("no_such_file_here.csv", "t", 0.5);
            FAIL("expected error");
        } catch (const error& e) {
            CHECK(e.code() == errc::missing_file);
        }
    }
    SUBCASE("missing column") {
        TempCsv csv("a,b\n1,2\n");
        try {
            ingest_csv(csv.path, "target", 0.5);
            FAIL("expected error");
        } catch (const error& e) {
            CHECK(e.code() == errc::missing_column);
        }
    }
    SUBCASE("zero usable rows") {
        TempCsv csv("a,target\nfoo,bar\n");
        try {
            ingest_csv(csv.path, "target", 0.5);
            FAIL("expected error");
        } catch (const error& e) {
            CHECK(e.code() == errc::no_usable_rows);
        }
    }
    SUBCASE("constant target") {
        TempCsv csv("a,target\n1,3\n2,3\n3,3\n");
        try {
            ingest_csv(csv.path, "target", 0.5);
            FAIL("expected error");
        } catch (const error& e) {
            CHECK(e.code() == errc::constant_target);
        }
    }
}

TEST_CASE("normalization round-trip for non-constant columns") {
    TempCsv csv("a,b,target\n1.5,-3,0\n2.75,4,1\n9.25,0.5,2\n");
    Dataset ds = ingest_csv(csv.path, "target", 0.5);
    const double raws[3][2] = {{1.5, -3}, {2.75, 4}, {9.25, 0.5}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(ds.denormalize(j, ds.at(i, j)) == doctest::Approx(raws[i][j]).epsilon(1e-12));
}

TEST_CASE("split sizes follow the floor rule") {
    Dataset ds = synth_blobs(10, 2, 5.0, 1);
    Split sp = split(ds, 7);
    CHECK(sp.train.rows == 8);
    CHECK(sp.test.rows == 2);

    Dataset ds2 = synth_blobs(101, 2, 5.0, 1);
    Split sp2 = split(ds2, 7);
    CHECK(sp2.train.rows == 80);
    CHECK(sp2.test.rows == 21);
}

TEST_CASE("split is deterministic and partitions are disjoint") {
    Dataset ds = synth_blobs(50, 3, 4.0, 3);
    Split a = split(ds, 42);
    Split b = split(ds, 42);
    CHECK(a.train.features == b.train.features);
    CHECK(a.test.features == b.test.features);
    CHECK(a.train.labels == b.train.labels);

    // The two parts recompose the original row multiset.
    auto row_key = [&](const Dataset& d, std::size_t i) {
        auto r = d.row(i);
        return std::vector<double>(r.begin(), r.end());
    };
    std::multiset<std::vector<double>> all, parts;
    for (std::size_t i = 0; i < ds.rows; ++i)
        all.insert(row_key(ds, i));
    for (std::size_t i = 0; i < a.train.rows; ++i)
        parts.insert(row_key(a.train, i));
    for (std::size_t i = 0; i < a.test.rows; ++i)
        parts.insert(row_key(a.test, i));
    CHECK(all == parts);

    Split c = split(ds, 43);
    CHECK(c.train.features != a.train.features);
}

TEST_CASE("split refuses tiny datasets") {
    Dataset ds = synth_blobs(4, 2, 5.0, 1);
    CHECK_THROWS_AS(split(ds, 1), error);
}

TEST_CASE("mask_mcar basics") {
    const Instance x{0.2, 0.5, 0.9};
    SUBCASE("m = 0 is the identity") {
        IncompleteInstance out = mask_mcar(x, {0, 99});
        CHECK(out.values == x);
        CHECK(out.complete());
    }
    SUBCASE("m = n removes everything") {
        IncompleteInstance out = mask_mcar(x, {3, 99});
        CHECK(out.n_missing() == 3);
    }
    SUBCASE("m = 1 removes exactly one, others unchanged") {
        IncompleteInstance out = mask_mcar(x, {1, 7});
        CHECK(out.n_missing() == 1);
        for (std::size_t i = 0; i < 3; ++i)
            if (!out.missing(i))
                CHECK(out.values[i] == x[i]);
    }
    SUBCASE("m > n is an error") { CHECK_THROWS_AS(mask_mcar(x, {4, 0}), error); }
}

TEST_CASE("mask_mcar removes exactly m coordinates for any seed") {
    const Instance x{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    for (std::size_t m = 0; m <= 6; ++m)
        for (std::uint64_t seed = 0; seed < 50; ++seed)
            CHECK(mask_mcar(x, {m, seed}).n_missing() == m);
}

TEST_CASE("mask_mcar is uniform over coordinates") {
    // 10,000 seeded masks with m=1 on n=4: each coordinate near 1/4.
    const Instance x{1.0, 2.0, 3.0, 4.0};
    std::size_t counts[4] = {0, 0, 0, 0};
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        IncompleteInstance out = mask_mcar(x, {1, seed});
        for (std::size_t i = 0; i < 4; ++i)
            if (out.missing(i))
                ++counts[i];
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const double freq = static_cast<double>(counts[i]) / 10000.0;
        CHECK(freq > 0.23);
        CHECK(freq < 0.27);
    }
}

TEST_CASE("synth_blobs balance, normalization, determinism") {
    Dataset ds = synth_blobs(100, 2, 10.0, 5);
    std::size_t n1 = 0;
    for (int l : ds.labels)
        n1 += static_cast<std::size_t>(l);
    CHECK(n1 == 50);
    for (double v : ds.features) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    Dataset again = synth_blobs(100, 2, 10.0, 5);
    CHECK(ds.features == again.features);
    CHECK(ds.labels == again.labels);

    CHECK_THROWS_AS(synth_blobs(3, 2, 1.0, 0), error);
    CHECK_THROWS_AS(synth_blobs(10, 0, 1.0, 0), error);
    CHECK_THROWS_AS(synth_blobs(10, 2, 0.0, 0), error);
}
