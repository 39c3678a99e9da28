// nn.hpp - fully connected autoencoder networks.
//
// Widths follow a fixed depth schedule keyed on the attribute count D, with
// ReLU after every layer except the last.  A probabilistic head doubles the
// final layer: the first D outputs are the reconstruction mean, the last D
// pass through Softplus (plus a small floor) to give a positive scale.
// Training state is explicit - parameters, Adam moments and gradients are
// plain structs - so runs are reproducible and checkpoints are bit-exact.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace odkit {

// Floor added to the Softplus scale output so the uncertainty term of the
// probabilistic loss can never divide by zero or take log of zero.
inline constexpr double kSigmaFloor = 1e-6;

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Layer schedule
// ---------------------------------------------------------------------------

struct LayerSchedule {
    std::vector<std::size_t> units;  // widths including the input layer
    bool doubled_output = false;     // probabilistic head: last width is 2D

    std::size_t input_dim() const { return units.front(); }
    std::size_t output_dim() const { return units.back(); }
    std::size_t layer_count() const { return units.size() - 1; }

    bool operator==(const LayerSchedule&) const = default;
};

// Depth/width schedule keyed on the attribute count D.  Interior widths are
// integer divisions of D floored to at least one unit; `doubled_output`
// doubles the final width for the mean/scale head.
inline LayerSchedule build_schedule(std::size_t dim, bool doubled_output) {
    if (dim < 1) throw DataError("build_schedule: attribute count must be >= 1");
    auto unit = [&](std::size_t div) { return std::max<std::size_t>(1, dim / div); };
    LayerSchedule s;
    if (dim < 20)
        s.units = {dim, unit(2), dim};
    else if (dim < 100)
        s.units = {dim, unit(2), unit(4), unit(2), dim};
    else if (dim < 200)
        s.units = {dim, unit(2), unit(4), unit(8), unit(4), unit(2), dim};
    else
        s.units = {dim, unit(2), unit(4), unit(16), unit(4), unit(2), dim};
    s.doubled_output = doubled_output;
    if (doubled_output) s.units.back() *= 2;
    return s;
}

// ---------------------------------------------------------------------------
// Parameters, forward, backward
// ---------------------------------------------------------------------------

struct NetworkParams {
    LayerSchedule schedule;
    std::vector<Matrix> weights;              // layer l: units[l+1] x units[l]
    std::vector<std::vector<double>> biases;  // layer l: units[l+1]
};

// Glorot-uniform weights, zero biases.  Draw order is fixed (layer by layer,
// output unit major) so a seed pins the full initialization.
inline NetworkParams init_params(const LayerSchedule& schedule, std::uint64_t seed) {
    NetworkParams p;
    p.schedule = schedule;
    Rng rng(seed);
    for (std::size_t l = 0; l < schedule.layer_count(); ++l) {
        const std::size_t fan_in = schedule.units[l];
        const std::size_t fan_out = schedule.units[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (std::size_t o = 0; o < fan_out; ++o)
            for (std::size_t i = 0; i < fan_in; ++i) w(o, i) = rng.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

struct ForwardTrace {
    std::vector<Matrix> activations;     // a_0 (input) ... a_L (network output)
    std::vector<Matrix> preactivations;  // z_1 ... z_L

    const Matrix& output() const { return activations.back(); }
};

namespace detail {

// z = a W^T + b
inline Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& b) {
    Matrix z(a.rows(), w.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto ar = a.row(r);
        auto zr = z.row(r);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            const auto wo = w.row(o);
            double acc = b[o];
            for (std::size_t i = 0; i < ar.size(); ++i) acc += ar[i] * wo[i];
            zr[o] = acc;
        }
    }
    return z;
}

inline void apply_output_activation(const LayerSchedule& s, Matrix& a) {
    if (!s.doubled_output) return;  // plain head: identity
    const std::size_t half = s.output_dim() / 2;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = half; c < s.output_dim(); ++c)
            a(r, c) = softplus(a(r, c)) + kSigmaFloor;
}

}  // namespace detail

inline ForwardTrace forward_traced(const NetworkParams& p, const Matrix& input) {
    if (input.cols() != p.schedule.input_dim())
        throw DataError("forward: input has " + std::to_string(input.cols()) +
                        " attributes, network expects " + std::to_string(p.schedule.input_dim()));
    ForwardTrace t;
    t.activations.push_back(input);
    const std::size_t layers = p.schedule.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = detail::affine(t.activations.back(), p.weights[l], p.biases[l]);
        Matrix a = z;
        if (l + 1 < layers) {
            for (std::size_t i = 0; i < a.size(); ++i)
                a.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;  // ReLU
        } else {
            detail::apply_output_activation(p.schedule, a);
        }
        t.preactivations.push_back(std::move(z));
        t.activations.push_back(std::move(a));
    }
    return t;
}

inline Matrix forward(const NetworkParams& p, const Matrix& input) {
    return forward_traced(p, input).activations.back();
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

// Backpropagates d(loss)/d(output) through the trace.  The scale half of a
// doubled head routes through the Softplus derivative; the floor shift has
// derivative one and needs no handling.
inline Gradients backward(const NetworkParams& p, const ForwardTrace& trace,
                          const Matrix& output_grad) {
    const std::size_t layers = p.schedule.layer_count();
    Gradients g;
    g.weights.resize(layers);
    g.biases.resize(layers);

    Matrix da = output_grad;  // d loss / d a_l, starting at l = layers
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& z = trace.preactivations[l];
        Matrix dz = da;
        if (l + 1 < layers) {
            for (std::size_t i = 0; i < dz.size(); ++i)
                if (z.data()[i] <= 0.0) dz.data()[i] = 0.0;  // ReLU'
        } else if (p.schedule.doubled_output) {
            const std::size_t half = p.schedule.output_dim() / 2;
            for (std::size_t r = 0; r < dz.rows(); ++r)
                for (std::size_t c = half; c < dz.cols(); ++c) dz(r, c) *= sigmoid(z(r, c));
        }

        const Matrix& a_prev = trace.activations[l];
        Matrix dw(p.weights[l].rows(), p.weights[l].cols());
        std::vector<double> db(p.biases[l].size(), 0.0);
        for (std::size_t r = 0; r < dz.rows(); ++r) {
            const auto dzr = dz.row(r);
            const auto ar = a_prev.row(r);
            for (std::size_t o = 0; o < dw.rows(); ++o) {
                auto dwo = dw.row(o);
                const double dzv = dzr[o];
                db[o] += dzv;
                for (std::size_t i = 0; i < dwo.size(); ++i) dwo[i] += dzv * ar[i];
            }
        }

        if (l > 0) {
            Matrix prev(dz.rows(), p.weights[l].cols());
            for (std::size_t r = 0; r < dz.rows(); ++r) {
                const auto dzr = dz.row(r);
                auto pr = prev.row(r);
                for (std::size_t o = 0; o < p.weights[l].rows(); ++o) {
                    const auto wo = p.weights[l].row(o);
                    const double dzv = dzr[o];
                    for (std::size_t i = 0; i < pr.size(); ++i) pr[i] += dzv * wo[i];
                }
            }
            da = std::move(prev);
        }
        g.weights[l] = std::move(dw);
        g.biases[l] = std::move(db);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    std::uint64_t t = 0;

    static AdamState zeros_like(const NetworkParams& p) {
        AdamState s;
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            s.m_w.emplace_back(p.weights[l].rows(), p.weights[l].cols());
            s.v_w.emplace_back(p.weights[l].rows(), p.weights[l].cols());
            s.m_b.emplace_back(p.biases[l].size(), 0.0);
            s.v_b.emplace_back(p.biases[l].size(), 0.0);
        }
        return s;
    }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam update, in place.  Non-finite gradients abort.
inline void adam_step(NetworkParams& p, const Gradients& g, AdamState& s, double lr) {
    ++s.t;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(s.t));
    auto update = [&](double& param, double grad, double& m, double& v) {
        if (!std::isfinite(grad)) throw NumericError("adam_step: non-finite gradient");
        m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
        v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad * grad;
        param -= lr * (m / c1) / (std::sqrt(v / c2) + kAdamEps);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (std::size_t i = 0; i < p.weights[l].size(); ++i)
            update(p.weights[l].data()[i], g.weights[l].data()[i], s.m_w[l].data()[i],
                   s.v_w[l].data()[i]);
        for (std::size_t i = 0; i < p.biases[l].size(); ++i)
            update(p.biases[l][i], g.biases[l][i], s.m_b[l][i], s.v_b[l][i]);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header + raw little-endian float64 parameter block
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'O', 'D', 'K', 'I', 'T', 'C', 'K', '1'};

struct Checkpoint {
    NetworkParams params;
    nlohmann::json meta;
};

inline void save_checkpoint(const std::string& path, const NetworkParams& p,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json header;
    header["units"] = p.schedule.units;
    header["doubled_output"] = p.schedule.doubled_output;
    header["meta"] = meta;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    auto write_doubles = [&](const double* v, std::size_t n) {
        out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        write_doubles(p.weights[l].data(), p.weights[l].size());
        write_doubles(p.biases[l].data(), p.biases[l].size());
    }
    if (!out) throw DataError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[sizeof kCheckpointMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw DataError("not a checkpoint file: " + path);
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("truncated checkpoint header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid checkpoint header: " + e.what());
    }
    Checkpoint ck;
    ck.params.schedule.units = header.at("units").get<std::vector<std::size_t>>();
    ck.params.schedule.doubled_output = header.at("doubled_output").get<bool>();
    ck.meta = header.value("meta", nlohmann::json::object());
    if (ck.params.schedule.units.size() < 2)
        throw DataError(path + ": checkpoint schedule has fewer than two layers");

    auto read_doubles = [&](double* v, std::size_t n) {
        in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
    };
    const auto& units = ck.params.schedule.units;
    for (std::size_t l = 0; l + 1 < units.size(); ++l) {
        Matrix w(units[l + 1], units[l]);
        std::vector<double> b(units[l + 1], 0.0);
        read_doubles(w.data(), w.size());
        read_doubles(b.data(), b.size());
        ck.params.weights.push_back(std::move(w));
        ck.params.biases.push_back(std::move(b));
    }
    if (!in) throw DataError("truncated checkpoint payload: " + path);
    return ck;
}

}  // namespace odkit
