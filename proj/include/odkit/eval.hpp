// eval.hpp - k selection, ensembling and the end-to-end benchmark pipeline.
//
// The two-step procedure:
//   step 1 (select_k): for every candidate k, train s1 short detectors and
//     record each run's best validation AUC across epochs; the k with the
//     highest mean wins (ties go to the smaller k).  All candidates share the
//     same runs - one forward pass per epoch scores every k at once.
//   step 2 (train_ensemble): train s2 detectors at the chosen k, keep each
//     run's best-AUC snapshot, retain the top sb by validation AUC, and
//     average their min/max-normalized scores into the ensemble score.
// Runs may execute concurrently (ODKIT_THREADS); results are keyed by run
// index and each run's seed is derived from the master seed, so the output
// is identical regardless of thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "detector.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "meanshift.hpp"
#include "metrics.hpp"

namespace odkit {

// ---------------------------------------------------------------------------
// Scorer kinds
// ---------------------------------------------------------------------------

enum class ScorerKind { Mse, Apre, MssMse, MssApre };

inline std::string to_string(ScorerKind s) {
    switch (s) {
        case ScorerKind::Mse: return "mse";
        case ScorerKind::Apre: return "apre";
        case ScorerKind::MssMse: return "mss-mse";
        default: return "mss-apre";
    }
}

inline ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "mse") return ScorerKind::Mse;
    if (s == "apre") return ScorerKind::Apre;
    if (s == "mss-mse") return ScorerKind::MssMse;
    if (s == "mss-apre") return ScorerKind::MssApre;
    throw ConfigError("unknown scorer '" + s + "' (expected mse, apre, mss-mse or mss-apre)");
}

inline bool scorer_uses_shift(ScorerKind s) {
    return s == ScorerKind::MssMse || s == ScorerKind::MssApre;
}

// mse/mss-mse score a point-output autoencoder; apre/mss-apre need the
// probabilistic head.
inline DetectorKind required_detector(ScorerKind s) {
    return (s == ScorerKind::Mse || s == ScorerKind::MssMse) ? DetectorKind::AeMse
                                                             : DetectorKind::PaePre;
}

// Row scorer over a scored matrix.  `target` is the comparison-target matrix
// for mean-shift scorers (the scored rows' shifted twins, same row order);
// plain scorers compare against the row itself and ignore `target`.
inline RowScorer make_row_scorer(ScorerKind kind, ScoreWeights w, Matrix target = Matrix{}) {
    switch (kind) {
        case ScorerKind::Mse:
            return [](std::size_t, std::span<const double> x, std::span<const double> mu,
                      std::span<const double>) { return mse_score(x, mu); };
        case ScorerKind::Apre:
            return [w](std::size_t, std::span<const double> x, std::span<const double> mu,
                       std::span<const double> sigma) { return apre_score(x, mu, sigma, w); };
        case ScorerKind::MssMse:
            return [t = std::move(target)](std::size_t row, std::span<const double>,
                                           std::span<const double> mu, std::span<const double>) {
                return mss_mse_score(t.row(row), mu);
            };
        default:
            return [t = std::move(target), w](std::size_t row, std::span<const double>,
                                              std::span<const double> mu,
                                              std::span<const double> sigma) {
                return mss_apre_score(t.row(row), mu, sigma, w.alpha, w.beta);
            };
    }
}

inline ValidationScorer make_validation_scorer(ScorerKind kind, ScoreWeights w, Matrix target) {
    if (kind == ScorerKind::Mse || kind == ScorerKind::MssMse)
        return make_mse_validation_scorer(std::move(target));
    return make_apre_validation_scorer(std::move(target), w);
}

// ---------------------------------------------------------------------------
// Parallel run helper
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t worker_count(std::size_t tasks) {
    std::size_t workers = 0;
    if (const char* env = std::getenv("ODKIT_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v > 0) workers = static_cast<std::size_t>(v);
    }
    if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return std::min(workers, std::max<std::size_t>(1, tasks));
}

// Runs fn(0..tasks-1), possibly on several threads.  Task indices carry all
// outputs, so scheduling order cannot affect results.
inline void run_parallel(std::size_t tasks, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = worker_count(tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(tasks);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < tasks; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct EnsembleConfig {
    std::size_t s1 = 20;  // runs per candidate k in step 1
    std::size_t s2 = 20;  // runs trained in step 2
    std::size_t sb = 5;   // best runs retained for the ensemble
    std::vector<std::size_t> k_candidates;  // empty = 1..min(99, N_train-1)
    std::size_t m = 1;
    ScoreWeights weights;
    std::size_t epochs = 5000;
    double lr = 0.001;
    std::uint64_t master_seed = 1;
};

inline std::vector<std::size_t> default_k_candidates(std::size_t n_train) {
    if (n_train < 2) throw DataError("default_k_candidates: need at least 2 training rows");
    const std::size_t upper = std::min<std::size_t>(99, n_train - 1);
    std::vector<std::size_t> ks(upper);
    for (std::size_t i = 0; i < upper; ++i) ks[i] = i + 1;
    return ks;
}

// ---------------------------------------------------------------------------
// Step 1: k selection
// ---------------------------------------------------------------------------

struct KSelection {
    std::size_t chosen_k = 0;
    std::vector<std::pair<std::size_t, double>> mean_best_auc;  // (k, mean over runs)
    std::vector<std::uint64_t> run_seeds;
};

inline KSelection select_k(const EnsembleConfig& cfg, ScorerKind scorer, const Matrix& train,
                           const Matrix& val, const std::vector<int>& val_labels) {
    if (!scorer_uses_shift(scorer))
        throw ConfigError("select_k: requires a mean-shift scorer (mss-mse or mss-apre)");
    const std::vector<std::size_t> candidates =
        cfg.k_candidates.empty() ? default_k_candidates(train.rows()) : cfg.k_candidates;
    for (std::size_t k : candidates)
        if (k < 1 || k > train.rows() - 1)
            throw ConfigError("select_k: candidate k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(train.rows() - 1) + "]");

    // Shift machinery per candidate, shared by every run.
    std::vector<Matrix> shifted_val(candidates.size());
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        const ShiftChain chain = shift_training_set(train, candidates[ci], cfg.m);
        shifted_val[ci] = shift_points(val, train, chain);
    }

    const DetectorKind kind = required_detector(scorer);
    KSelection sel;
    sel.run_seeds.resize(cfg.s1);
    std::vector<std::vector<double>> best(cfg.s1);  // [run][candidate] best AUC over epochs

    detail::run_parallel(cfg.s1, [&](std::size_t run) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, 1, run);
        sel.run_seeds[run] = seed;
        try {
            Trainer trainer(kind, train.cols(), seed, cfg.lr);
            std::vector<double> run_best(candidates.size(), -1.0);
            std::vector<double> scores(val.rows());
            for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
                const Reconstruction rec = trainer.reconstruct(val);
                for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
                    for (std::size_t i = 0; i < val.rows(); ++i)
                        scores[i] = scorer == ScorerKind::MssMse
                                        ? mss_mse_score(shifted_val[ci].row(i), rec.mu.row(i))
                                        : mss_apre_score(shifted_val[ci].row(i), rec.mu.row(i),
                                                         rec.sigma.row(i), cfg.weights.alpha,
                                                         cfg.weights.beta);
                    run_best[ci] = std::max(run_best[ci], auc(scores, val_labels));
                }
                if (epoch < cfg.epochs) {
                    double loss;
                    try {
                        loss = trainer.step(train);
                    } catch (const NumericError& e) {
                        throw NumericError(std::string(e.what()) + " (epoch " +
                                           std::to_string(epoch + 1) + ")");
                    }
                    if (!std::isfinite(loss))
                        throw NumericError("diverged: non-finite loss at epoch " +
                                           std::to_string(epoch + 1));
                }
            }
            best[run] = std::move(run_best);
        } catch (const NumericError& e) {
            throw NumericError("k-selection run " + std::to_string(run) + ": " + e.what());
        }
    });

    double best_mean = -1.0;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        double mean = 0.0;
        for (std::size_t run = 0; run < cfg.s1; ++run) mean += best[run][ci];
        mean /= static_cast<double>(cfg.s1);
        sel.mean_best_auc.emplace_back(candidates[ci], mean);
        if (mean > best_mean || (mean == best_mean && candidates[ci] < sel.chosen_k)) {
            best_mean = mean;
            sel.chosen_k = candidates[ci];
        }
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Step 2: ensemble training and scoring
// ---------------------------------------------------------------------------

struct RunRecord {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::string error;
    std::size_t best_epoch = 0;
    double best_validation_auc = 0.0;
};

struct EnsembleMember {
    DetectorModel model;
    std::size_t run_index = 0;
    double a = 0.0;  // max validation score: normalizes to 1
    double b = 0.0;  // min validation score: normalizes to 0
};

// Self-contained scoring object: carries the training matrix and shift chain
// so new points can be shifted and scored without re-deriving anything.
struct DetectorEnsemble {
    ScorerKind scorer = ScorerKind::Mse;
    ScoreWeights weights;
    std::size_t k = 0;  // 0 for plain scorers
    std::size_t m = 0;
    Matrix train;
    ShiftChain chain;  // empty for plain scorers
    std::vector<EnsembleMember> members;
};

struct EnsembleTraining {
    DetectorEnsemble ensemble;
    std::vector<RunRecord> runs;
    std::vector<std::size_t> retained;  // run indices, best validation AUC first
};

// Trains s2 detectors and retains the top sb by validation AUC (ties favor
// the lower run index).  Diverged runs are recorded and skipped; it is an
// error if fewer than sb runs converge.  `k` is only read by mean-shift
// scorers.
inline EnsembleTraining train_ensemble(const EnsembleConfig& cfg, ScorerKind scorer,
                                       const Matrix& train_x, const Matrix& val,
                                       const std::vector<int>& val_labels, std::size_t k = 0) {
    if (cfg.sb < 1 || cfg.sb > cfg.s2)
        throw ConfigError("train_ensemble: sb must be in [1, s2]");
    EnsembleTraining out;
    DetectorEnsemble& ens = out.ensemble;
    ens.scorer = scorer;
    ens.weights = cfg.weights;
    ens.m = cfg.m;
    ens.train = train_x;

    Matrix shifted_val;
    if (scorer_uses_shift(scorer)) {
        if (k < 1 || k > train_x.rows() - 1)
            throw ConfigError("train_ensemble: k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(train_x.rows() - 1) + "]");
        ens.k = k;
        ens.chain = shift_training_set(train_x, k, cfg.m);
        shifted_val = shift_points(val, train_x, ens.chain);
    }
    const Matrix& target = scorer_uses_shift(scorer) ? shifted_val : val;
    const ValidationScorer vscorer = make_validation_scorer(scorer, cfg.weights, target);
    const DetectorKind kind = required_detector(scorer);

    out.runs.resize(cfg.s2);
    std::vector<DetectorModel> models(cfg.s2);
    detail::run_parallel(cfg.s2, [&](std::size_t run) {
        RunRecord& rec = out.runs[run];
        rec.run = run;
        rec.seed = derive_seed(cfg.master_seed, 2, run);
        try {
            models[run] =
                train(kind, train_x, val, val_labels, vscorer, cfg.epochs, cfg.lr, rec.seed);
            rec.converged = true;
            rec.best_epoch = models[run].best_epoch;
            rec.best_validation_auc = models[run].best_validation_auc;
        } catch (const NumericError& e) {
            rec.error = e.what();
        }
    });

    std::vector<std::size_t> survivors;
    for (std::size_t run = 0; run < cfg.s2; ++run)
        if (out.runs[run].converged) survivors.push_back(run);
    if (survivors.size() < cfg.sb)
        throw NumericError("train_ensemble: only " + std::to_string(survivors.size()) + " of " +
                           std::to_string(cfg.s2) + " runs converged; need sb=" +
                           std::to_string(cfg.sb));
    std::sort(survivors.begin(), survivors.end(), [&](std::size_t x, std::size_t y) {
        const double ax = out.runs[x].best_validation_auc, ay = out.runs[y].best_validation_auc;
        return ax != ay ? ax > ay : x < y;
    });
    survivors.resize(cfg.sb);
    out.retained = survivors;

    const RowScorer rscorer = make_row_scorer(scorer, cfg.weights, target);
    for (std::size_t run : survivors) {
        EnsembleMember member;
        member.model = std::move(models[run]);
        member.run_index = run;
        const std::vector<double> raw = score_all(member.model, val, rscorer);
        member.a = *std::max_element(raw.begin(), raw.end());
        member.b = *std::min_element(raw.begin(), raw.end());
        ens.members.push_back(std::move(member));
    }
    return out;
}

struct EnsembleScores {
    std::vector<double> ensemble;          // mean of normalized member scores
    std::vector<std::vector<double>> raw;  // per member, retained order
};

// Ensemble score: each member's raw score is min/max-normalized with the
// bounds recorded on its validation set, then averaged.  A member with a == b
// (constant validation scores) contributes 0.5 everywhere.
inline EnsembleScores ensemble_score(const DetectorEnsemble& ens, const Matrix& x) {
    if (ens.members.empty()) throw ConfigError("ensemble_score: ensemble has no members");
    Matrix target;
    if (scorer_uses_shift(ens.scorer)) target = shift_points(x, ens.train, ens.chain);
    const RowScorer rscorer =
        make_row_scorer(ens.scorer, ens.weights, scorer_uses_shift(ens.scorer) ? target : x);

    EnsembleScores out;
    out.ensemble.assign(x.rows(), 0.0);
    for (const EnsembleMember& member : ens.members) {
        std::vector<double> raw = score_all(member.model, x, rscorer);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double norm =
                member.a == member.b ? 0.5 : (raw[i] - member.b) / (member.a - member.b);
            out.ensemble[i] += norm;
        }
        out.raw.push_back(std::move(raw));
    }
    for (double& v : out.ensemble) v /= static_cast<double>(ens.members.size());
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark pipeline
// ---------------------------------------------------------------------------

struct BenchmarkConfig {
    std::string dataset;  // CSV path
    std::string label_column = "label";
    DetectorKind detector = DetectorKind::PaePre;
    ScorerKind scorer = ScorerKind::MssApre;
    bool k_auto = true;
    std::size_t k_fixed = 0;
    EnsembleConfig ens;
};

// Collects every violated constraint so the caller sees them all at once.
inline void validate_config(const BenchmarkConfig& cfg) {
    std::vector<std::string> bad;
    if (cfg.dataset.empty()) bad.push_back("dataset: path must be nonempty");
    if (required_detector(cfg.scorer) != cfg.detector)
        bad.push_back("scorer '" + to_string(cfg.scorer) + "' requires detector '" +
                      to_string(required_detector(cfg.scorer)) + "', got '" +
                      to_string(cfg.detector) + "'");
    if (!(cfg.ens.weights.alpha > 0.0) || !std::isfinite(cfg.ens.weights.alpha))
        bad.push_back("alpha: must be finite and > 0");
    if (!(cfg.ens.weights.beta > 0.0) || !std::isfinite(cfg.ens.weights.beta))
        bad.push_back("beta: must be finite and > 0");
    if (cfg.ens.m < 1) bad.push_back("m: must be >= 1");
    if (cfg.ens.s1 < 1) bad.push_back("s1: must be >= 1");
    if (cfg.ens.s2 < 1) bad.push_back("s2: must be >= 1");
    if (cfg.ens.sb < 1 || cfg.ens.sb > cfg.ens.s2) bad.push_back("sb: must be in [1, s2]");
    if (!(cfg.ens.lr > 0.0) || !std::isfinite(cfg.ens.lr)) bad.push_back("lr: must be finite and > 0");
    if (scorer_uses_shift(cfg.scorer) && !cfg.k_auto && cfg.k_fixed < 1)
        bad.push_back("k: fixed k must be >= 1");
    for (std::size_t k : cfg.ens.k_candidates)
        if (k < 1) bad.push_back("k_candidates: every candidate must be >= 1");
    if (!bad.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ConfigError(msg);
    }
}

struct BenchmarkReport {
    BenchmarkConfig config;
    std::size_t n = 0, d = 0;
    std::size_t train_n = 0;
    std::size_t val_n = 0, val_outliers = 0;
    std::size_t test_n = 0, test_outliers = 0;
    std::optional<KSelection> k_selection;  // present only when k was auto-selected
    std::size_t chosen_k = 0;               // 0 for plain scorers
    std::vector<RunRecord> runs;
    std::vector<std::size_t> retained;
    std::vector<std::pair<double, double>> scale;  // (a, b) per retained member
    double test_auc = 0.0;
    std::vector<double> test_scores;
    std::vector<std::vector<double>> test_raw;
    std::vector<int> test_labels;
    std::vector<RocPoint> roc;
    std::string timestamp;       // ISO-8601 UTC
    double wall_seconds = 0.0;
};

// End-to-end run on an in-memory labeled dataset: split, normalize on the
// training split, optionally select k, train the ensemble, score the test
// split.  Everything except the report's meta block (timestamp + wall clock)
// is a pure function of the dataset and the configuration.
inline BenchmarkReport run_benchmark(const Dataset& data, const BenchmarkConfig& cfg) {
    validate_config(cfg);
    const auto t_start = std::chrono::steady_clock::now();

    BenchmarkReport report;
    report.config = cfg;
    report.n = data.n();
    report.d = data.dim();

    Splits splits = stratified_split(data, cfg.ens.master_seed);
    const NormStats stats = fit_normalizer(splits.train);
    const Matrix train = apply_normalizer(stats, splits.train).values;
    const Dataset val = apply_normalizer(stats, splits.validation);
    const Dataset test = apply_normalizer(stats, splits.test);
    report.train_n = train.rows();
    report.val_n = val.n();
    report.val_outliers = val.outlier_count();
    report.test_n = test.n();
    report.test_outliers = test.outlier_count();

    std::size_t k = 0;
    if (scorer_uses_shift(cfg.scorer)) {
        if (cfg.k_auto) {
            report.k_selection = select_k(cfg.ens, cfg.scorer, train, val.values, val.labels);
            k = report.k_selection->chosen_k;
        } else {
            if (cfg.k_fixed > train.rows() - 1)
                throw ConfigError("k: fixed k=" + std::to_string(cfg.k_fixed) +
                                  " exceeds training rows - 1 = " + std::to_string(train.rows() - 1));
            k = cfg.k_fixed;
        }
    }
    report.chosen_k = k;

    EnsembleTraining et = train_ensemble(cfg.ens, cfg.scorer, train, val.values, val.labels, k);
    report.runs = et.runs;
    report.retained = et.retained;
    for (const EnsembleMember& m : et.ensemble.members) report.scale.emplace_back(m.a, m.b);

    EnsembleScores scores = ensemble_score(et.ensemble, test.values);
    report.test_scores = std::move(scores.ensemble);
    report.test_raw = std::move(scores.raw);
    report.test_labels = test.labels;
    report.test_auc = auc(report.test_scores, report.test_labels);
    report.roc = roc_points(report.test_scores, report.test_labels);

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    report.timestamp = buf;
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const BenchmarkConfig& cfg) {
    nlohmann::json j;
    j["dataset"] = cfg.dataset;
    j["label_column"] = cfg.label_column;
    j["detector"] = to_string(cfg.detector);
    j["scorer"] = to_string(cfg.scorer);
    j["alpha"] = cfg.ens.weights.alpha;
    j["beta"] = cfg.ens.weights.beta;
    j["m"] = cfg.ens.m;
    if (cfg.k_auto)
        j["k"] = "auto";
    else
        j["k"] = cfg.k_fixed;
    if (!cfg.ens.k_candidates.empty()) j["k_candidates"] = cfg.ens.k_candidates;
    j["s1"] = cfg.ens.s1;
    j["s2"] = cfg.ens.s2;
    j["sb"] = cfg.ens.sb;
    j["epochs"] = cfg.ens.epochs;
    j["lr"] = cfg.ens.lr;
    j["seed"] = cfg.ens.master_seed;
    return j;
}

inline BenchmarkConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "dataset", "label_column", "detector", "scorer", "alpha", "beta", "m",
        "k",       "k_candidates", "s1",       "s2",     "sb",    "epochs",
        "lr",      "seed"};
    std::vector<std::string> bad;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            bad.push_back("unknown configuration key '" + it.key() + "'");

    BenchmarkConfig cfg;
    try {
        cfg.dataset = j.value("dataset", std::string{});
        cfg.label_column = j.value("label_column", std::string{"label"});
        if (j.contains("detector"))
            cfg.detector = detector_kind_from_string(j.at("detector").get<std::string>());
        if (j.contains("scorer"))
            cfg.scorer = scorer_kind_from_string(j.at("scorer").get<std::string>());
        cfg.ens.weights.alpha = j.value("alpha", cfg.ens.weights.alpha);
        cfg.ens.weights.beta = j.value("beta", cfg.ens.weights.beta);
        cfg.ens.m = j.value("m", cfg.ens.m);
        if (j.contains("k")) {
            if (j.at("k").is_string()) {
                if (j.at("k").get<std::string>() != "auto")
                    bad.push_back("k: must be a positive integer or \"auto\"");
            } else {
                cfg.k_auto = false;
                cfg.k_fixed = j.at("k").get<std::size_t>();
            }
        }
        if (j.contains("k_candidates"))
            cfg.ens.k_candidates = j.at("k_candidates").get<std::vector<std::size_t>>();
        cfg.ens.s1 = j.value("s1", cfg.ens.s1);
        cfg.ens.s2 = j.value("s2", cfg.ens.s2);
        cfg.ens.sb = j.value("sb", cfg.ens.sb);
        cfg.ens.epochs = j.value("epochs", cfg.ens.epochs);
        cfg.ens.lr = j.value("lr", cfg.ens.lr);
        cfg.ens.master_seed = j.value("seed", cfg.ens.master_seed);
    } catch (const nlohmann::json::exception& e) {
        bad.push_back(std::string("malformed value: ") + e.what());
    }
    if (!bad.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ConfigError(msg);
    }
    return cfg;
}

inline nlohmann::json report_to_json(const BenchmarkReport& r) {
    nlohmann::json j;
    j["config"] = config_to_json(r.config);
    j["data"] = {{"n", r.n},
                 {"d", r.d},
                 {"splits",
                  {{"train", {{"n", r.train_n}}},
                   {"validation", {{"n", r.val_n}, {"outliers", r.val_outliers}}},
                   {"test", {{"n", r.test_n}, {"outliers", r.test_outliers}}}}}};
    if (r.k_selection) {
        nlohmann::json table = nlohmann::json::array();
        for (const auto& [k, mean] : r.k_selection->mean_best_auc)
            table.push_back({{"k", k}, {"mean_best_auc", mean}});
        j["k_selection"] = {{"chosen_k", r.k_selection->chosen_k},
                            {"table", table},
                            {"run_seeds", r.k_selection->run_seeds}};
    } else {
        j["k_selection"] = nullptr;
    }
    j["chosen_k"] = r.chosen_k;
    nlohmann::json runs = nlohmann::json::array();
    for (const RunRecord& rec : r.runs) {
        nlohmann::json rj = {{"run", rec.run},
                             {"seed", rec.seed},
                             {"converged", rec.converged},
                             {"best_epoch", rec.best_epoch},
                             {"best_validation_auc", rec.best_validation_auc}};
        if (!rec.converged) rj["error"] = rec.error;
        runs.push_back(rj);
    }
    nlohmann::json scale = nlohmann::json::array();
    for (const auto& [a, b] : r.scale) scale.push_back({{"a", a}, {"b", b}});
    j["ensemble"] = {{"runs", runs}, {"retained", r.retained}, {"scale", scale}};
    j["results"] = {{"test_auc", r.test_auc}};
    j["meta"] = {{"timestamp", r.timestamp}, {"wall_clock_seconds", r.wall_seconds}};
    return j;
}

// Writes report.json, scores.csv (row, top member's raw score, ensemble
// score) and roc.csv into `outdir` (created if needed).
inline void write_report_files(const std::string& outdir, const BenchmarkReport& r) {
    std::filesystem::create_directories(outdir);
    {
        std::ofstream out(outdir + "/report.json");
        if (!out) throw DataError("cannot write report: " + outdir + "/report.json");
        out << report_to_json(r).dump(2) << '\n';
    }
    {
        std::ofstream out(outdir + "/scores.csv");
        if (!out) throw DataError("cannot write scores: " + outdir + "/scores.csv");
        out << "row,raw_score,ensemble_score\n";
        for (std::size_t i = 0; i < r.test_scores.size(); ++i)
            out << i << ',' << format_double(r.test_raw.front()[i]) << ','
                << format_double(r.test_scores[i]) << '\n';
    }
    {
        std::ofstream out(outdir + "/roc.csv");
        if (!out) throw DataError("cannot write roc: " + outdir + "/roc.csv");
        out << "threshold,fpr,tpr\n";
        for (const RocPoint& p : r.roc)
            out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
                << format_double(p.tpr) << '\n';
    }
}

}  // namespace odkit
