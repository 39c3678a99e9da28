// meanshift.hpp - k-NN mean-shift smoothing and mean-shift outlier scores.
//
// One shift iteration replaces every point with the arithmetic mean of itself
// and its k nearest neighbors (k+1 points total).  Iterating m times on the
// training set produces a chain of progressively smoothed copies; points not
// in the training set are shifted against that chain one at a time, so they
// never act as each other's neighbors.  The mean is accumulated self-first,
// then neighbors in ascending (distance, index) order - a fixed summation
// order that independent re-computations can reproduce bit-for-bit.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "kdtree.hpp"
#include "matrix.hpp"

namespace odkit {

struct ShiftChain {
    std::vector<Matrix> shifted;  // iteration 1 .. m, each N x D
    std::size_t k = 0;
    std::size_t m = 0;
};

namespace detail {

inline std::vector<double> shift_one(std::span<const double> x, const Matrix& ref,
                                     const std::vector<std::size_t>& neighbors) {
    std::vector<double> acc(x.begin(), x.end());
    for (std::size_t n : neighbors) {
        const auto row = ref.row(n);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += row[d];
    }
    const double denom = static_cast<double>(neighbors.size() + 1);
    for (double& v : acc) v /= denom;
    return acc;
}

}  // namespace detail

// m mean-shift iterations over the training set.  Each iteration rebuilds the
// neighbor structure on the previous iteration's output and excludes every
// point from its own neighbor list.
inline ShiftChain shift_training_set(const Matrix& train, std::size_t k, std::size_t m) {
    if (m < 1) throw DataError("shift_training_set: m must be >= 1");
    if (k < 1 || k > train.rows() - 1)
        throw DataError("shift_training_set: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(train.rows() - 1) + "]");
    ShiftChain chain;
    chain.k = k;
    chain.m = m;
    const Matrix* cur = &train;
    for (std::size_t it = 0; it < m; ++it) {
        KdTree tree(*cur);
        Matrix next(cur->rows(), cur->cols());
        for (std::size_t i = 0; i < cur->rows(); ++i) {
            const auto nb = tree.knn(cur->row(i), k, static_cast<std::ptrdiff_t>(i));
            const auto s = detail::shift_one(cur->row(i), *cur, nb);
            for (std::size_t d = 0; d < s.size(); ++d) next(i, d) = s[d];
        }
        chain.shifted.push_back(std::move(next));
        cur = &chain.shifted.back();
    }
    return chain;
}

// Shifts out-of-training rows through an existing chain: iteration 1 searches
// the original training set, iteration j > 1 searches the chain's iteration
// j-1 output.  Queries are never excluded (they are not members) and never
// see each other.
inline Matrix shift_points(const Matrix& queries, const Matrix& train, const ShiftChain& chain) {
    if (queries.cols() != train.cols())
        throw DataError("shift_points: query/train attribute mismatch");
    if (chain.shifted.size() != chain.m || chain.m < 1)
        throw DataError("shift_points: malformed shift chain");
    if (chain.k > train.rows())
        throw DataError("shift_points: chain k exceeds training set size");
    Matrix cur = queries;
    for (std::size_t it = 0; it < chain.m; ++it) {
        const Matrix& ref = it == 0 ? train : chain.shifted[it - 1];
        KdTree tree(ref);
        Matrix next(cur.rows(), cur.cols());
        for (std::size_t i = 0; i < cur.rows(); ++i) {
            const auto nb = tree.knn(cur.row(i), chain.k);
            const auto s = detail::shift_one(cur.row(i), ref, nb);
            for (std::size_t d = 0; d < s.size(); ++d) next(i, d) = s[d];
        }
        cur = std::move(next);
    }
    return cur;
}

inline std::vector<double> shift_test_point(std::span<const double> x, const Matrix& train,
                                            const ShiftChain& chain) {
    Matrix q(1, x.size());
    for (std::size_t d = 0; d < x.size(); ++d) q(0, d) = x[d];
    Matrix shifted = shift_points(q, train, chain);
    return {shifted.row(0).begin(), shifted.row(0).end()};
}

// ---------------------------------------------------------------------------
// Mean-shift outlier scores: the network reconstructs the ORIGINAL point; only
// the comparison target moves to the shifted position.
// ---------------------------------------------------------------------------

inline double mss_mse_score(std::span<const double> shifted_x, std::span<const double> mu) {
    if (shifted_x.size() != mu.size()) throw DataError("mss_mse_score: length mismatch");
    return squared_distance(shifted_x, mu);
}

inline double mss_apre_score(std::span<const double> shifted_x, std::span<const double> mu,
                             std::span<const double> sigma, double alpha, double beta) {
    if (shifted_x.size() != mu.size() || mu.size() != sigma.size())
        throw DataError("mss_apre_score: length mismatch");
    double bias = 0.0, unc = 0.0;
    for (std::size_t d = 0; d < mu.size(); ++d) {
        if (sigma[d] <= 0.0) throw NumericError("mss_apre_score: nonpositive sigma");
        const double diff = shifted_x[d] - mu[d];
        bias += diff * diff / sigma[d];
        unc += std::log(sigma[d]);
    }
    return alpha * bias + beta * unc;
}

// ---------------------------------------------------------------------------
// Persistence: one CSV per iteration plus a JSON sidecar carrying k, m and a
// hash of the source matrix the chain was derived from.
// ---------------------------------------------------------------------------

inline std::uint64_t matrix_hash(const Matrix& m) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    auto mix = [&](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    const std::uint64_t dims[2] = {m.rows(), m.cols()};
    mix(dims, sizeof dims);
    mix(m.data(), m.size() * sizeof(double));
    return h;
}

inline void save_shift_chain(const std::string& dir, const ShiftChain& chain,
                             const Matrix& source) {
    for (std::size_t it = 0; it < chain.m; ++it) {
        const Matrix& mat = chain.shifted[it];
        std::ofstream out(dir + "/shift_" + std::to_string(it + 1) + ".csv");
        if (!out) throw DataError("cannot write shift chain CSV in: " + dir);
        for (std::size_t c = 0; c < mat.cols(); ++c) out << (c ? "," : "") << "x" << c;
        out << '\n';
        for (std::size_t r = 0; r < mat.rows(); ++r) {
            for (std::size_t c = 0; c < mat.cols(); ++c)
                out << (c ? "," : "") << format_double(mat(r, c));
            out << '\n';
        }
    }
    nlohmann::json j;
    j["k"] = chain.k;
    j["m"] = chain.m;
    j["source_hash"] = matrix_hash(source);
    std::ofstream out(dir + "/shift_chain.json");
    if (!out) throw DataError("cannot write shift chain sidecar in: " + dir);
    out << j.dump(2) << '\n';
}

struct LoadedShiftChain {
    ShiftChain chain;
    std::uint64_t source_hash = 0;
};

inline LoadedShiftChain load_shift_chain(const std::string& dir) {
    std::ifstream in(dir + "/shift_chain.json");
    if (!in) throw DataError("cannot open shift chain sidecar in: " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/shift_chain.json: invalid JSON: " + e.what());
    }
    LoadedShiftChain loaded;
    loaded.chain.k = j.at("k").get<std::size_t>();
    loaded.chain.m = j.at("m").get<std::size_t>();
    loaded.source_hash = j.at("source_hash").get<std::uint64_t>();
    for (std::size_t it = 0; it < loaded.chain.m; ++it) {
        CsvTable t = read_csv_table(dir + "/shift_" + std::to_string(it + 1) + ".csv");
        Matrix mat(t.rows.size(), t.header.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            for (std::size_t c = 0; c < t.header.size(); ++c)
                mat(r, c) = parse_double_cell(t.rows[r][c], r + 1, t.header[c]);
        loaded.chain.shifted.push_back(std::move(mat));
    }
    return loaded;
}

}  // namespace odkit
