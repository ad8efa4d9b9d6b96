#include "cxbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cxbench/errors.hpp"
#include "cxbench/rng.hpp"

namespace cxbench {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& cell, double& out) {
    std::string t = trim(cell);
    if (t.empty())
        return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Min-max normalizes one column in place; constant columns become all zeros.
std::pair<double, double> normalize_column(std::vector<double>& col) {
    auto [mn_it, mx_it] = std::minmax_element(col.begin(), col.end());
    double mn = *mn_it, mx = *mx_it;
    if (mx > mn) {
        for (double& v : col)
            v = (v - mn) / (mx - mn);
    } else {
        std::fill(col.begin(), col.end(), 0.0);
    }
    return {mn, mx};
}

Dataset from_columns(std::vector<std::vector<double>> cols, std::vector<int> labels,
                     std::vector<std::string> names) {
    Dataset ds;
    ds.cols = cols.size();
    ds.rows = labels.size();
    ds.feature_names = std::move(names);
    ds.labels = std::move(labels);
    ds.norm_params.reserve(ds.cols);
    for (auto& c : cols)
        ds.norm_params.push_back(normalize_column(c));
    ds.features.resize(ds.rows * ds.cols);
    for (std::size_t i = 0; i < ds.rows; ++i)
        for (std::size_t j = 0; j < ds.cols; ++j)
            ds.features[i * ds.cols + j] = cols[j][i];
    return ds;
}

} // namespace

Dataset ingest_csv(const std::string& path, const std::string& target_column, double threshold) {
    std::ifstream in(path);
    if (!in)
        throw error(errc::missing_file, "cannot open CSV file: " + path);

    std::string header;
    if (!std::getline(in, header))
        throw error(errc::no_usable_rows, "CSV has no header row: " + path);

    std::vector<std::string> names = split_line(header);
    for (auto& n : names)
        n = trim(n);

    std::size_t target_idx = names.size();
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == target_column)
            target_idx = j;
    if (target_idx == names.size())
        throw error(errc::missing_column, "target column not found: " + target_column);

    const std::size_t n_feat = names.size() - 1;
    std::vector<std::vector<double>> cols(n_feat);
    std::vector<double> target;
    std::size_t dropped = 0;

    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != names.size()) {
            ++dropped;
            continue;
        }
        std::vector<double> parsed(cells.size());
        bool ok = true;
        for (std::size_t j = 0; j < cells.size() && ok; ++j)
            ok = parse_number(cells[j], parsed[j]);
        if (!ok) {
            ++dropped;
            continue;
        }
        std::size_t f = 0;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (j == target_idx)
                target.push_back(parsed[j]);
            else
                cols[f++].push_back(parsed[j]);
        }
    }

    if (target.empty())
        throw error(errc::no_usable_rows, "no usable data rows in " + path);

    auto [tmin_it, tmax_it] = std::minmax_element(target.begin(), target.end());
    if (!(*tmax_it > *tmin_it))
        throw error(errc::constant_target,
                    "target column is constant; binarization threshold undefined");
    double tmin = *tmin_it, tmax = *tmax_it;

    std::vector<int> labels(target.size());
    for (std::size_t i = 0; i < target.size(); ++i)
        labels[i] = (target[i] - tmin) / (tmax - tmin) >= threshold ? 1 : 0;

    std::vector<std::string> feat_names;
    for (std::size_t j = 0; j < names.size(); ++j)
        if (j != target_idx)
            feat_names.push_back(names[j]);

    Dataset ds = from_columns(std::move(cols), std::move(labels), std::move(feat_names));
    ds.dropped_rows = dropped;
    return ds;
}

Split split(const Dataset& ds, std::uint64_t seed) {
    if (ds.rows < 5)
        throw error(errc::too_few_rows, "split requires at least 5 rows");

    std::vector<std::size_t> idx(ds.rows);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    const std::size_t n_train = static_cast<std::size_t>(0.8 * static_cast<double>(ds.rows));
    auto take = [&](std::size_t from, std::size_t to) {
        Dataset part;
        part.cols = ds.cols;
        part.rows = to - from;
        part.feature_names = ds.feature_names;
        part.norm_params = ds.norm_params;
        part.features.reserve(part.rows * part.cols);
        part.labels.reserve(part.rows);
        for (std::size_t k = from; k < to; ++k) {
            auto r = ds.row(idx[k]);
            part.features.insert(part.features.end(), r.begin(), r.end());
            part.labels.push_back(ds.labels[idx[k]]);
        }
        return part;
    };
    return Split{take(0, n_train), take(n_train, ds.rows)};
}

IncompleteInstance mask_mcar(const Instance& x, const MaskSpec& spec) {
    const std::size_t n = x.size();
    if (spec.m > n)
        throw error(errc::bad_argument, "mask size m exceeds feature count");

    IncompleteInstance out{x};
    if (spec.m == 0)
        return out;

    // Partial Fisher-Yates: the first m slots are a uniform m-subset.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(spec.seed);
    for (std::size_t i = 0; i < spec.m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
        out.values[idx[i]] = IncompleteInstance::missing_value();
    }
    return out;
}

Dataset synth_blobs(std::size_t n_rows, std::size_t n_features, double separation,
                    std::uint64_t seed) {
    if (n_rows < 4 || n_features < 1 || !(separation > 0.0))
        throw error(errc::bad_argument, "synth_blobs: need n_rows >= 4, n_features >= 1, separation > 0");

    auto rng = make_rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    const std::size_t n0 = (n_rows + 1) / 2;
    std::vector<std::vector<double>> cols(n_features, std::vector<double>(n_rows));
    std::vector<int> labels(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const int cls = i < n0 ? 0 : 1;
        labels[i] = cls;
        const double center = cls == 0 ? 0.0 : separation;
        for (std::size_t j = 0; j < n_features; ++j)
            cols[j][i] = center + noise(rng);
    }

    std::vector<std::string> names;
    names.reserve(n_features);
    for (std::size_t j = 0; j < n_features; ++j)
        names.push_back("f" + std::to_string(j));
    return from_columns(std::move(cols), std::move(labels), std::move(names));
}

} // namespace cxbench
