#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cxbench {

using Instance = std::vector<double>;

// A tabular dataset after ingestion: features min-max normalized to [0,1]
// column-wise, binary labels, and the raw-unit (min, max) per column so
// values can be mapped back.
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> features; // row-major, rows * cols
    std::vector<int> labels;      // one {0,1} label per row
    std::vector<std::string> feature_names;
    std::vector<std::pair<double, double>> norm_params; // raw (min, max) per column
    std::size_t dropped_rows = 0; // rows discarded during ingestion

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * cols, cols};
    }
    Instance instance(std::size_t i) const {
        auto r = row(i);
        return Instance(r.begin(), r.end());
    }
    double at(std::size_t i, std::size_t j) const { return features[i * cols + j]; }

    // Maps a normalized value back to raw units for column j.
    double denormalize(std::size_t j, double v) const {
        auto [mn, mx] = norm_params[j];
        return mn + v * (mx - mn);
    }
    // Maps a raw value into [0,1] for column j; constant columns map to 0.
    double normalize_raw(std::size_t j, double raw) const {
        auto [mn, mx] = norm_params[j];
        return mx > mn ? (raw - mn) / (mx - mn) : 0.0;
    }
};

// An observation with some coordinates unknown. Missing entries are NaN.
struct IncompleteInstance {
    Instance values;

    static constexpr double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
    bool missing(std::size_t i) const { return std::isnan(values[i]); }
    std::size_t n_missing() const {
        std::size_t c = 0;
        for (double v : values)
            c += std::isnan(v) ? 1 : 0;
        return c;
    }
    bool complete() const { return n_missing() == 0; }
    std::vector<std::size_t> missing_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (missing(i))
                idx.push_back(i);
        return idx;
    }
};

struct MaskSpec {
    std::size_t m = 0;
    std::uint64_t seed = 0;
};

struct Split {
    Dataset train;
    Dataset test;
};

// Loads a CSV with a header row, min-max normalizes every non-target column,
// and binarizes the min-max-normalized target at `threshold` (ties -> 1).
// Rows with unparseable or empty cells are dropped and counted.
Dataset ingest_csv(const std::string& path, const std::string& target_column, double threshold);

// Seeded shuffle, then floor(0.8 * rows) train rows and the rest test.
Split split(const Dataset& ds, std::uint64_t seed);

// Removes exactly spec.m coordinates, chosen uniformly without replacement.
IncompleteInstance mask_mcar(const Instance& x, const MaskSpec& spec);

// Two Gaussian clusters labeled 0/1 (balanced within one row), min-max
// normalized. Cluster centers are separated by `separation` per coordinate.
Dataset synth_blobs(std::size_t n_rows, std::size_t n_features, double separation,
                    std::uint64_t seed);

} // namespace cxbench
