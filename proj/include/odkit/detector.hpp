// detector.hpp - autoencoder outlier detectors: losses, scores, training.
//
// Two detector kinds share one training loop:
//   ae-mse  - conventional autoencoder, squared-error loss, point output
//   pae-pre - probabilistic autoencoder whose doubled head emits a mean and a
//             positive scale per attribute, trained with the probabilistic
//             reconstruction loss  sum (x-mu)^2/sigma + sum ln sigma
// Training is full batch.  After every epoch the validation set is scored
// with a caller-supplied scorer and the parameter snapshot with the best
// validation AUC is kept (earliest epoch wins ties), which makes the loop
// reusable for both plain and mean-shift scoring variants.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "nn.hpp"

namespace odkit {

enum class DetectorKind { AeMse, PaePre };

inline std::string to_string(DetectorKind kind) {
    return kind == DetectorKind::AeMse ? "ae-mse" : "pae-pre";
}

inline DetectorKind detector_kind_from_string(const std::string& s) {
    if (s == "ae-mse") return DetectorKind::AeMse;
    if (s == "pae-pre") return DetectorKind::PaePre;
    throw ConfigError("unknown detector kind '" + s + "' (expected ae-mse or pae-pre)");
}

struct ScoreWeights {
    double alpha = 0.5;
    double beta = 2.0;
};

// ---------------------------------------------------------------------------
// Losses (sums over the whole batch)
// ---------------------------------------------------------------------------

inline double mse_loss(const Matrix& x, const Matrix& mu) {
    if (x.rows() != mu.rows() || x.cols() != mu.cols())
        throw DataError("mse_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x.data()[i] - mu.data()[i];
        acc += diff * diff;
    }
    return acc;
}

// Probabilistic reconstruction loss.  The bias term is accumulated separately
// from the uncertainty term, so with sigma identically one the result is the
// squared-error loss exactly (the uncertainty sum is exactly zero).
inline double pre_loss(const Matrix& x, const Matrix& mu, const Matrix& sigma) {
    if (x.rows() != mu.rows() || x.cols() != mu.cols() || x.rows() != sigma.rows() ||
        x.cols() != sigma.cols())
        throw DataError("pre_loss: shape mismatch");
    double bias = 0.0, unc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigma.data()[i];
        if (s <= 0.0) throw NumericError("pre_loss: nonpositive sigma");
        const double diff = x.data()[i] - mu.data()[i];
        bias += diff * diff / s;
        unc += std::log(s);
    }
    return bias + unc;
}

struct PreLossGrad {
    Matrix d_mu;
    Matrix d_sigma;
};

inline PreLossGrad pre_loss_grad(const Matrix& x, const Matrix& mu, const Matrix& sigma) {
    if (x.rows() != mu.rows() || x.cols() != mu.cols() || x.rows() != sigma.rows() ||
        x.cols() != sigma.cols())
        throw DataError("pre_loss_grad: shape mismatch");
    PreLossGrad g{Matrix(x.rows(), x.cols()), Matrix(x.rows(), x.cols())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigma.data()[i];
        if (s <= 0.0) throw NumericError("pre_loss_grad: nonpositive sigma");
        const double diff = x.data()[i] - mu.data()[i];
        g.d_mu.data()[i] = -2.0 * diff / s;
        g.d_sigma.data()[i] = -diff * diff / (s * s) + 1.0 / s;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Per-sample scores
// ---------------------------------------------------------------------------

inline double mse_score(std::span<const double> x, std::span<const double> mu) {
    if (x.size() != mu.size()) throw DataError("mse_score: length mismatch");
    return squared_distance(x, mu);
}

// Weighted probabilistic score: alpha * bias term + beta * uncertainty term.
inline double apre_score(std::span<const double> x, std::span<const double> mu,
                         std::span<const double> sigma, const ScoreWeights& w) {
    if (x.size() != mu.size() || mu.size() != sigma.size())
        throw DataError("apre_score: length mismatch");
    double bias = 0.0, unc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        if (sigma[d] <= 0.0) throw NumericError("apre_score: nonpositive sigma");
        const double diff = x[d] - mu[d];
        bias += diff * diff / sigma[d];
        unc += std::log(sigma[d]);
    }
    return w.alpha * bias + w.beta * unc;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

struct Reconstruction {
    Matrix mu;
    Matrix sigma;  // empty for ae-mse
};

inline Reconstruction reconstruct(DetectorKind kind, const NetworkParams& params, const Matrix& x) {
    Matrix out = forward(params, x);
    if (kind == DetectorKind::AeMse) return {std::move(out), Matrix{}};
    const std::size_t half = params.schedule.output_dim() / 2;
    Reconstruction rec{Matrix(x.rows(), half), Matrix(x.rows(), half)};
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < half; ++c) {
            rec.mu(r, c) = out(r, c);
            rec.sigma(r, c) = out(r, half + c);
        }
    return rec;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// Owns one network plus its optimizer state; one step() is one full-batch
// epoch.  Exposed separately from train() so the k-selection loop can drive
// epochs itself and score many candidate k values off a single forward pass.
class Trainer {
public:
    Trainer(DetectorKind kind, std::size_t dim, std::uint64_t seed, double lr)
        : kind_(kind),
          lr_(lr),
          params_(init_params(build_schedule(dim, kind == DetectorKind::PaePre), seed)),
          adam_(AdamState::zeros_like(params_)) {}

    double step(const Matrix& train_x) {
        ForwardTrace trace = forward_traced(params_, train_x);
        const Matrix& out = trace.output();
        double loss;
        Matrix output_grad(out.rows(), out.cols());
        if (kind_ == DetectorKind::AeMse) {
            loss = mse_loss(train_x, out);
            for (std::size_t i = 0; i < out.size(); ++i)
                output_grad.data()[i] = -2.0 * (train_x.data()[i] - out.data()[i]);
        } else {
            const std::size_t half = out.cols() / 2;
            Matrix mu(out.rows(), half), sigma(out.rows(), half);
            for (std::size_t r = 0; r < out.rows(); ++r)
                for (std::size_t c = 0; c < half; ++c) {
                    mu(r, c) = out(r, c);
                    sigma(r, c) = out(r, half + c);
                }
            loss = pre_loss(train_x, mu, sigma);
            PreLossGrad g = pre_loss_grad(train_x, mu, sigma);
            for (std::size_t r = 0; r < out.rows(); ++r)
                for (std::size_t c = 0; c < half; ++c) {
                    output_grad(r, c) = g.d_mu(r, c);
                    output_grad(r, half + c) = g.d_sigma(r, c);
                }
        }
        Gradients grads = backward(params_, trace, output_grad);
        adam_step(params_, grads, adam_, lr_);
        return loss;
    }

    Reconstruction reconstruct(const Matrix& x) const { return odkit::reconstruct(kind_, params_, x); }

    DetectorKind kind() const { return kind_; }
    const NetworkParams& params() const { return params_; }

private:
    DetectorKind kind_;
    double lr_;
    NetworkParams params_;
    AdamState adam_;
};

// Maps a validation reconstruction to one outlier score per row.  The closure
// carries the comparison targets (original rows for plain scoring, shifted
// rows for mean-shift scoring).
using ValidationScorer = std::function<std::vector<double>(const Reconstruction&)>;

inline ValidationScorer make_mse_validation_scorer(Matrix target) {
    return [target = std::move(target)](const Reconstruction& rec) {
        std::vector<double> scores(target.rows());
        for (std::size_t i = 0; i < target.rows(); ++i)
            scores[i] = mse_score(target.row(i), rec.mu.row(i));
        return scores;
    };
}

inline ValidationScorer make_apre_validation_scorer(Matrix target, ScoreWeights w) {
    return [target = std::move(target), w](const Reconstruction& rec) {
        std::vector<double> scores(target.rows());
        for (std::size_t i = 0; i < target.rows(); ++i)
            scores[i] = apre_score(target.row(i), rec.mu.row(i), rec.sigma.row(i), w);
        return scores;
    };
}

struct DetectorModel {
    DetectorKind kind;
    NetworkParams params;
    std::size_t best_epoch = 0;
    double best_validation_auc = 0.0;
    std::uint64_t seed = 0;
};

// Full-batch training with per-epoch validation.  Epoch 0 (the untrained
// initialization) is evaluated too, so with epochs=0 the returned model is
// the initialization itself.  Aborts with a NumericError naming the epoch if
// the loss or a gradient goes non-finite.
inline DetectorModel train(DetectorKind kind, const Matrix& train_x, const Matrix& val_x,
                           const std::vector<int>& val_labels, const ValidationScorer& scorer,
                           std::size_t epochs, double lr, std::uint64_t seed) {
    if (train_x.cols() != val_x.cols()) throw DataError("train: train/validation attribute mismatch");
    if (val_labels.size() != val_x.rows())
        throw DataError("train: validation labels do not match validation rows");
    Trainer trainer(kind, train_x.cols(), seed, lr);

    DetectorModel best{kind, trainer.params(), 0, 0.0, seed};
    best.best_validation_auc = auc(scorer(trainer.reconstruct(val_x)), val_labels);
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        double loss;
        try {
            loss = trainer.step(train_x);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
        }
        if (!std::isfinite(loss))
            throw NumericError("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
        double a;
        try {
            a = auc(scorer(trainer.reconstruct(val_x)), val_labels);
        } catch (const NumericError& e) {
            // the loss above is pre-update, so a run whose final step explodes
            // only shows up here, as non-finite validation scores
            throw NumericError("training diverged: " + std::string(e.what()) + " (epoch " +
                               std::to_string(epoch) + ")");
        }
        if (a > best.best_validation_auc) {
            best.best_validation_auc = a;
            best.best_epoch = epoch;
            best.params = trainer.params();
        }
    }
    return best;
}

// Scores every row of x with one shared forward pass.  The scorer sees the
// row index (so mean-shift variants can look up the row's shifted twin), the
// original row and its reconstruction.
using RowScorer = std::function<double(std::size_t row, std::span<const double> x,
                                       std::span<const double> mu, std::span<const double> sigma)>;

inline std::vector<double> score_all(const DetectorModel& model, const Matrix& x,
                                     const RowScorer& scorer) {
    const Reconstruction rec = reconstruct(model.kind, model.params, x);
    std::vector<double> scores(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        scores[i] = scorer(i, x.row(i), rec.mu.row(i),
                           model.kind == DetectorKind::PaePre ? rec.sigma.row(i)
                                                              : std::span<const double>{});
    return scores;
}

// ---------------------------------------------------------------------------
// Model persistence (checkpoint with detector metadata)
// ---------------------------------------------------------------------------

inline void save_model(const std::string& path, const DetectorModel& model) {
    nlohmann::json meta;
    meta["kind"] = to_string(model.kind);
    meta["best_epoch"] = model.best_epoch;
    meta["best_validation_auc"] = model.best_validation_auc;
    meta["seed"] = model.seed;
    save_checkpoint(path, model.params, meta);
}

inline DetectorModel load_model(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    DetectorModel model;
    model.kind = detector_kind_from_string(ck.meta.at("kind").get<std::string>());
    model.params = std::move(ck.params);
    model.best_epoch = ck.meta.value("best_epoch", std::size_t{0});
    model.best_validation_auc = ck.meta.value("best_validation_auc", 0.0);
    model.seed = ck.meta.value("seed", std::uint64_t{0});
    return model;
}

}  // namespace odkit
