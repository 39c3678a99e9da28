// dataset.hpp - CSV ingestion, normalization and stratified splitting.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace odkit {

struct Dataset {
    Matrix values;
    std::vector<int> labels;  // empty = unlabeled; otherwise one 0/1 per row
    std::vector<std::string> feature_names;
    std::string label_name = "label";

    std::size_t n() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
    bool has_labels() const { return !labels.empty(); }

    std::size_t outlier_count() const {
        std::size_t c = 0;
        for (int l : labels) c += static_cast<std::size_t>(l);
        return c;
    }
};

// Loads a CSV with mandatory header.  When label_column is given, that column
// is parsed as 0/1 labels and excluded from the feature matrix; otherwise all
// columns are features.
inline Dataset load_csv(const std::string& path, const std::string& label_column = "") {
    CsvTable table = read_csv_table(path);
    std::size_t label_idx = table.header.size();  // sentinel: no label column
    if (!label_column.empty()) {
        auto it = std::find(table.header.begin(), table.header.end(), label_column);
        if (it == table.header.end()) {
            std::string names;
            for (const auto& h : table.header) names += (names.empty() ? "" : ", ") + h;
            throw DataError(path + ": label column '" + label_column +
                            "' not found; available columns: " + names);
        }
        label_idx = static_cast<std::size_t>(it - table.header.begin());
    }

    Dataset data;
    const std::size_t dim = table.header.size() - (label_idx < table.header.size() ? 1 : 0);
    if (dim == 0) throw DataError(path + ": no feature columns remain");
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != label_idx) data.feature_names.push_back(table.header[c]);
    if (label_idx < table.header.size()) data.label_name = table.header[label_idx];

    data.values = Matrix(table.rows.size(), dim);
    if (label_idx < table.header.size()) data.labels.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            const double v = parse_double_cell(table.rows[r][c], r + 1, table.header[c]);
            if (c == label_idx) {
                if (v != 0.0 && v != 1.0)
                    throw DataError(path + ": label outside {0,1} at row " + std::to_string(r + 1) +
                                    ", column '" + table.header[c] + "': " + table.rows[r][c]);
                data.labels.push_back(static_cast<int>(v));
            } else {
                data.values(r, col++) = v;
            }
        }
    }
    return data;
}

inline void save_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path);
    for (std::size_t c = 0; c < data.feature_names.size(); ++c)
        out << (c ? "," : "") << data.feature_names[c];
    if (data.has_labels()) out << (data.feature_names.empty() ? "" : ",") << data.label_name;
    out << '\n';
    for (std::size_t r = 0; r < data.n(); ++r) {
        for (std::size_t c = 0; c < data.dim(); ++c)
            out << (c ? "," : "") << format_double(data.values(r, c));
        if (data.has_labels()) out << ',' << data.labels[r];
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Normalization (mean-SD from a reference split, applied everywhere else)
// ---------------------------------------------------------------------------

struct NormStats {
    std::vector<double> mean;
    std::vector<double> sd;
};

// Per-attribute mean and population standard deviation.  Near-constant
// attributes (SD < 1e-12) get SD 1 so they normalize to zero instead of
// blowing up.
inline NormStats fit_normalizer(const Dataset& data) {
    if (data.n() == 0) throw DataError("fit_normalizer: empty dataset");
    const std::size_t d = data.dim();
    NormStats stats;
    stats.mean.assign(d, 0.0);
    stats.sd.assign(d, 0.0);
    for (std::size_t r = 0; r < data.n(); ++r)
        for (std::size_t c = 0; c < d; ++c) stats.mean[c] += data.values(r, c);
    for (std::size_t c = 0; c < d; ++c) stats.mean[c] /= static_cast<double>(data.n());
    for (std::size_t r = 0; r < data.n(); ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = data.values(r, c) - stats.mean[c];
            stats.sd[c] += diff * diff;
        }
    for (std::size_t c = 0; c < d; ++c) {
        stats.sd[c] = std::sqrt(stats.sd[c] / static_cast<double>(data.n()));
        if (stats.sd[c] < 1e-12) stats.sd[c] = 1.0;
    }
    return stats;
}

inline Dataset apply_normalizer(const NormStats& stats, const Dataset& data) {
    if (stats.mean.size() != data.dim())
        throw DataError("apply_normalizer: stats have " + std::to_string(stats.mean.size()) +
                        " attributes, data has " + std::to_string(data.dim()));
    Dataset out = data;
    for (std::size_t r = 0; r < out.n(); ++r)
        for (std::size_t c = 0; c < out.dim(); ++c)
            out.values(r, c) = (data.values(r, c) - stats.mean[c]) / stats.sd[c];
    return out;
}

inline Dataset invert_normalizer(const NormStats& stats, const Dataset& data) {
    if (stats.mean.size() != data.dim())
        throw DataError("invert_normalizer: stats have " + std::to_string(stats.mean.size()) +
                        " attributes, data has " + std::to_string(data.dim()));
    Dataset out = data;
    for (std::size_t r = 0; r < out.n(); ++r)
        for (std::size_t c = 0; c < out.dim(); ++c)
            out.values(r, c) = data.values(r, c) * stats.sd[c] + stats.mean[c];
    return out;
}

inline void save_norm_stats(const std::string& path, const NormStats& stats) {
    nlohmann::json j;
    j["mean"] = stats.mean;
    j["std"] = stats.sd;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write norm stats: " + path);
    out << j.dump(2) << '\n';
}

inline NormStats load_norm_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open norm stats: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    NormStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.sd = j.at("std").get<std::vector<double>>();
    if (stats.mean.size() != stats.sd.size())
        throw DataError(path + ": mean/std length mismatch");
    return stats;
}

// ---------------------------------------------------------------------------
// Stratified splitting
// ---------------------------------------------------------------------------

struct Splits {
    Dataset train;       // labels stripped: training is unsupervised
    Dataset validation;  // labeled
    Dataset test;        // labeled
    std::uint64_t seed = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> validation_indices;
    std::vector<std::size_t> test_indices;
};

namespace detail {

inline Dataset gather_rows(const Dataset& data, const std::vector<std::size_t>& idx,
                           bool keep_labels) {
    Dataset out;
    out.feature_names = data.feature_names;
    out.label_name = data.label_name;
    out.values = Matrix(idx.size(), data.dim());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < data.dim(); ++c) out.values(r, c) = data.values(idx[r], c);
    if (keep_labels && data.has_labels()) {
        out.labels.reserve(idx.size());
        for (std::size_t i : idx) out.labels.push_back(data.labels[i]);
    }
    return out;
}

}  // namespace detail

// Splits a labeled dataset 2:1:1 into train / validation / test, stratified by
// label: per stratum, test takes floor(n/4), validation takes a third of the
// remainder, train keeps the rest.  Assignment is randomized by `seed`; row
// order within each split follows the original file.  The train split comes
// back unlabeled.
inline Splits stratified_split(const Dataset& data, std::uint64_t seed) {
    if (!data.has_labels()) throw DataError("stratified_split: dataset has no labels");
    Splits splits;
    splits.seed = seed;
    Rng rng(seed);
    for (int label : {0, 1}) {
        std::vector<std::size_t> stratum;
        for (std::size_t i = 0; i < data.n(); ++i)
            if (data.labels[i] == label) stratum.push_back(i);
        rng.shuffle(stratum);
        const std::size_t n_test = stratum.size() / 4;
        const std::size_t n_val = (stratum.size() - n_test) / 3;
        const std::size_t n_train = stratum.size() - n_test - n_val;
        if (n_test == 0 || n_val == 0 || n_train == 0)
            throw DataError("stratified_split: stratum " + std::to_string(label) + " has only " +
                            std::to_string(stratum.size()) +
                            " rows, too small to populate all three splits");
        std::size_t p = 0;
        for (std::size_t i = 0; i < n_test; ++i) splits.test_indices.push_back(stratum[p++]);
        for (std::size_t i = 0; i < n_val; ++i) splits.validation_indices.push_back(stratum[p++]);
        for (std::size_t i = 0; i < n_train; ++i) splits.train_indices.push_back(stratum[p++]);
    }
    std::sort(splits.train_indices.begin(), splits.train_indices.end());
    std::sort(splits.validation_indices.begin(), splits.validation_indices.end());
    std::sort(splits.test_indices.begin(), splits.test_indices.end());
    splits.train = detail::gather_rows(data, splits.train_indices, /*keep_labels=*/false);
    splits.validation = detail::gather_rows(data, splits.validation_indices, true);
    splits.test = detail::gather_rows(data, splits.test_indices, true);
    return splits;
}

// Persists a split set as three CSVs plus an index sidecar, so the exact
// partition can be audited or reproduced without re-running the shuffle.
inline void save_splits(const std::string& dir, const Splits& splits) {
    save_csv(dir + "/train.csv", splits.train);
    save_csv(dir + "/validation.csv", splits.validation);
    save_csv(dir + "/test.csv", splits.test);
    nlohmann::json j;
    j["seed"] = splits.seed;
    j["train"] = splits.train_indices;
    j["validation"] = splits.validation_indices;
    j["test"] = splits.test_indices;
    std::ofstream out(dir + "/split_indices.json");
    if (!out) throw DataError("cannot write split sidecar in: " + dir);
    out << j.dump(2) << '\n';
}

}  // namespace odkit
