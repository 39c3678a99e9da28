// odkit_cli.cpp - command line front-end for the outlier detection toolkit.
//
// Commands:
//   prepare    split a labeled CSV into train/validation/test + sidecars
//   synth      generate a planted 2-D scenario
//   select-k   run step 1 only and report the chosen neighbor count
//   train      train one detector and save a checkpoint
//   score      score a CSV with a saved checkpoint
//   benchmark  full two-step pipeline: split, select k, ensemble, report
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 numerical failure.
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <odkit/odkit.hpp>

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v && *v) ? v : fallback;
}

// Precedence: explicit flag > config file entry > ODKIT_OUTDIR > ".".
std::string resolve_outdir(bool flag_set, const std::string& flag_value,
                           const std::optional<std::string>& file_value) {
    if (flag_set) return flag_value;
    if (file_value) return *file_value;
    return env_or("ODKIT_OUTDIR", ".");
}

std::size_t parse_positive_int(const std::string& text, const std::string& what) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size() || v == 0) throw std::invalid_argument(what);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw odkit::ConfigError(what + ": expected a positive integer, got '" + text + "'");
    }
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw odkit::ConfigError("cannot open config file: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw odkit::ConfigError(path + ": invalid JSON: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareOpts {
    std::string input;
    std::string label_column = "label";
    std::uint64_t seed = 1;
    std::string outdir;
    bool outdir_set = false;
};

void cmd_prepare(const PrepareOpts& o) {
    const std::string outdir = resolve_outdir(o.outdir_set, o.outdir, std::nullopt);
    const odkit::Dataset data = odkit::load_csv(o.input, o.label_column);
    const odkit::Splits splits = odkit::stratified_split(data, o.seed);
    const odkit::NormStats stats = odkit::fit_normalizer(splits.train);
    std::filesystem::create_directories(outdir);
    odkit::save_splits(outdir, splits);
    odkit::save_norm_stats(outdir + "/norm_stats.json", stats);
    std::cout << "prepared " << data.n() << " rows (" << data.dim() << " attributes) -> "
              << splits.train.n() << " train / " << splits.validation.n() << " validation / "
              << splits.test.n() << " test in " << outdir << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
    odkit::SynthSpec spec;
    std::string placement = "far-bias";
    std::string outdir;
    bool outdir_set = false;
};

void cmd_synth(const SynthOpts& o) {
    const std::string outdir = resolve_outdir(o.outdir_set, o.outdir, std::nullopt);
    odkit::SynthSpec spec = o.spec;
    spec.placement = odkit::synth_placement_from_string(o.placement);
    const odkit::Dataset data = odkit::generate_synthetic(spec);
    std::filesystem::create_directories(outdir);
    odkit::save_csv(outdir + "/synth.csv", data);
    std::cout << "wrote " << data.n() << " rows (" << spec.inliers << " inliers, " << spec.outliers
              << " outliers, " << o.placement << ") to " << outdir << "/synth.csv\n";
}

// ---------------------------------------------------------------------------
// benchmark / select-k (shared configuration handling)
// ---------------------------------------------------------------------------

struct BenchOpts {
    std::string config_path;
    std::string dataset, label_column, detector, scorer, k;
    double alpha = 0, beta = 0, lr = 0;
    std::size_t m = 0, s1 = 0, s2 = 0, sb = 0, epochs = 0;
    std::uint64_t seed = 0;
    std::string outdir;
    // which flags were actually passed
    bool has_dataset = false, has_label = false, has_detector = false, has_scorer = false;
    bool has_k = false, has_alpha = false, has_beta = false, has_lr = false, has_m = false;
    bool has_s1 = false, has_s2 = false, has_sb = false, has_epochs = false, has_seed = false;
    bool has_outdir = false;
};

// Builds the effective configuration: config file first, then flag overrides.
// Returns the config plus the resolved output directory.
std::pair<odkit::BenchmarkConfig, std::string> effective_config(const BenchOpts& o) {
    nlohmann::json j = nlohmann::json::object();
    std::optional<std::string> file_outdir;
    if (!o.config_path.empty()) {
        j = load_json_file(o.config_path);
        if (!j.is_object()) throw odkit::ConfigError(o.config_path + ": config must be a JSON object");
        if (j.contains("outdir")) {
            file_outdir = j.at("outdir").get<std::string>();
            j.erase("outdir");
        }
    }
    odkit::BenchmarkConfig cfg = odkit::config_from_json(j);
    if (o.has_dataset) cfg.dataset = o.dataset;
    if (o.has_label) cfg.label_column = o.label_column;
    if (o.has_detector) cfg.detector = odkit::detector_kind_from_string(o.detector);
    if (o.has_scorer) cfg.scorer = odkit::scorer_kind_from_string(o.scorer);
    if (o.has_k) {
        if (o.k == "auto") {
            cfg.k_auto = true;
            cfg.k_fixed = 0;
        } else {
            cfg.k_auto = false;
            cfg.k_fixed = parse_positive_int(o.k, "k");
        }
    }
    if (o.has_alpha) cfg.ens.weights.alpha = o.alpha;
    if (o.has_beta) cfg.ens.weights.beta = o.beta;
    if (o.has_lr) cfg.ens.lr = o.lr;
    if (o.has_m) cfg.ens.m = o.m;
    if (o.has_s1) cfg.ens.s1 = o.s1;
    if (o.has_s2) cfg.ens.s2 = o.s2;
    if (o.has_sb) cfg.ens.sb = o.sb;
    if (o.has_epochs) cfg.ens.epochs = o.epochs;
    if (o.has_seed) cfg.ens.master_seed = o.seed;
    return {cfg, resolve_outdir(o.has_outdir, o.outdir, file_outdir)};
}

void cmd_benchmark(const BenchOpts& o) {
    auto [cfg, outdir] = effective_config(o);
    odkit::validate_config(cfg);
    const odkit::Dataset data = odkit::load_csv(cfg.dataset, cfg.label_column);
    const odkit::BenchmarkReport report = odkit::run_benchmark(data, cfg);
    odkit::write_report_files(outdir, report);
    std::cout << "dataset " << cfg.dataset << ": " << report.n << " rows, " << report.d
              << " attributes\n";
    if (report.chosen_k > 0) std::cout << "chosen k: " << report.chosen_k << "\n";
    std::cout << "test AUC: " << odkit::format_double(report.test_auc) << "\n"
              << "report written to " << outdir << "/report.json\n";
}

void cmd_select_k(const BenchOpts& o) {
    auto [cfg, outdir] = effective_config(o);
    if (!odkit::scorer_uses_shift(cfg.scorer))
        throw odkit::ConfigError("select-k: requires a mean-shift scorer (mss-mse or mss-apre)");
    odkit::validate_config(cfg);
    const odkit::Dataset data = odkit::load_csv(cfg.dataset, cfg.label_column);
    odkit::Splits splits = odkit::stratified_split(data, cfg.ens.master_seed);
    const odkit::NormStats stats = odkit::fit_normalizer(splits.train);
    const odkit::Matrix train = odkit::apply_normalizer(stats, splits.train).values;
    const odkit::Dataset val = odkit::apply_normalizer(stats, splits.validation);
    const odkit::KSelection sel =
        odkit::select_k(cfg.ens, cfg.scorer, train, val.values, val.labels);

    nlohmann::json j;
    j["chosen_k"] = sel.chosen_k;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [k, mean] : sel.mean_best_auc)
        table.push_back({{"k", k}, {"mean_best_auc", mean}});
    j["table"] = table;
    j["run_seeds"] = sel.run_seeds;
    std::filesystem::create_directories(outdir);
    std::ofstream out(outdir + "/k_selection.json");
    if (!out) throw odkit::DataError("cannot write " + outdir + "/k_selection.json");
    out << j.dump(2) << '\n';
    std::cout << "chosen k: " << sel.chosen_k << " (table written to " << outdir
              << "/k_selection.json)\n";
}

// ---------------------------------------------------------------------------
// train / score
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string input;
    std::string label_column = "label";
    std::string detector = "pae-pre";
    std::string scorer;  // default: plain scorer for the detector kind
    std::size_t k = 0;
    std::size_t m = 1;
    double alpha = 0.5, beta = 2.0, lr = 0.001;
    std::size_t epochs = 5000;
    std::uint64_t seed = 1;
    std::string out = "model.ckpt";
};

void cmd_train(const TrainOpts& o) {
    const odkit::DetectorKind kind = odkit::detector_kind_from_string(o.detector);
    const odkit::ScorerKind scorer =
        o.scorer.empty()
            ? (kind == odkit::DetectorKind::AeMse ? odkit::ScorerKind::Mse
                                                  : odkit::ScorerKind::Apre)
            : odkit::scorer_kind_from_string(o.scorer);
    if (odkit::required_detector(scorer) != kind)
        throw odkit::ConfigError("scorer '" + o.scorer + "' requires detector '" +
                                 odkit::to_string(odkit::required_detector(scorer)) + "'");
    const odkit::Dataset data = odkit::load_csv(o.input, o.label_column);
    odkit::Splits splits = odkit::stratified_split(data, o.seed);
    const odkit::NormStats stats = odkit::fit_normalizer(splits.train);
    const odkit::Matrix train_x = odkit::apply_normalizer(stats, splits.train).values;
    const odkit::Dataset val = odkit::apply_normalizer(stats, splits.validation);

    odkit::Matrix target = val.values;
    if (odkit::scorer_uses_shift(scorer)) {
        if (o.k < 1) throw odkit::ConfigError("mean-shift scorer needs --k");
        if (o.k > train_x.rows() - 1)
            throw odkit::ConfigError("k=" + std::to_string(o.k) + " exceeds training rows - 1 = " +
                                     std::to_string(train_x.rows() - 1));
        const odkit::ShiftChain chain = odkit::shift_training_set(train_x, o.k, o.m);
        target = odkit::shift_points(val.values, train_x, chain);
    }
    const odkit::ScoreWeights w{o.alpha, o.beta};
    const odkit::ValidationScorer vscorer = odkit::make_validation_scorer(scorer, w, target);
    const std::uint64_t run_seed = odkit::derive_seed(o.seed, 2, 0);
    const odkit::DetectorModel model =
        odkit::train(kind, train_x, val.values, val.labels, vscorer, o.epochs, o.lr, run_seed);
    odkit::save_model(o.out, model);
    std::cout << "trained " << o.detector << " (seed " << o.seed << ", run seed " << run_seed
              << "): best epoch " << model.best_epoch << ", validation AUC "
              << odkit::format_double(model.best_validation_auc) << "\ncheckpoint written to "
              << o.out << "\n";
}

struct ScoreOpts {
    std::string checkpoint;
    std::string input;
    std::string label_column;  // optional: drop this column before scoring
    std::string norm_stats;    // optional: normalize input (and train CSV) first
    std::string scorer;        // default: plain scorer for the checkpoint kind
    std::string train_csv;     // required for mean-shift scorers
    std::size_t k = 0;
    std::size_t m = 1;
    double alpha = 0.5, beta = 2.0;
    std::string out = "scores.csv";
};

void cmd_score(const ScoreOpts& o) {
    const odkit::DetectorModel model = odkit::load_model(o.checkpoint);
    const odkit::ScorerKind scorer =
        o.scorer.empty()
            ? (model.kind == odkit::DetectorKind::AeMse ? odkit::ScorerKind::Mse
                                                        : odkit::ScorerKind::Apre)
            : odkit::scorer_kind_from_string(o.scorer);
    if (odkit::required_detector(scorer) != model.kind)
        throw odkit::ConfigError("scorer '" + odkit::to_string(scorer) +
                                 "' does not match checkpoint detector '" +
                                 odkit::to_string(model.kind) + "'");

    odkit::Dataset data = odkit::load_csv(o.input, o.label_column);
    if (!o.norm_stats.empty())
        data = odkit::apply_normalizer(odkit::load_norm_stats(o.norm_stats), data);

    odkit::Matrix target = data.values;
    if (odkit::scorer_uses_shift(scorer)) {
        if (o.train_csv.empty() || o.k < 1)
            throw odkit::ConfigError("mean-shift scorer needs --train-csv and --k");
        // drop the label column from the training csv too, when it carries one
        const auto thead = odkit::csv_header(o.train_csv);
        const bool tlabeled = !o.label_column.empty() &&
                              std::find(thead.begin(), thead.end(), o.label_column) != thead.end();
        odkit::Dataset train = odkit::load_csv(o.train_csv, tlabeled ? o.label_column : "");
        if (!o.norm_stats.empty())
            train = odkit::apply_normalizer(odkit::load_norm_stats(o.norm_stats), train);
        const odkit::ShiftChain chain = odkit::shift_training_set(train.values, o.k, o.m);
        target = odkit::shift_points(data.values, train.values, chain);
    }
    const odkit::RowScorer rscorer =
        odkit::make_row_scorer(scorer, odkit::ScoreWeights{o.alpha, o.beta}, target);
    const std::vector<double> scores = odkit::score_all(model, data.values, rscorer);

    std::ofstream out(o.out);
    if (!out) throw odkit::DataError("cannot write scores: " + o.out);
    out << "row,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
        out << i << ',' << odkit::format_double(scores[i]) << '\n';
    std::cout << "scored " << scores.size() << " rows with " << odkit::to_string(scorer) << " -> "
              << o.out << "\n";
}

void add_bench_flags(CLI::App* cmd, BenchOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--dataset", o.dataset, "labeled CSV path")->each([&](const std::string&) {
        o.has_dataset = true;
    });
    cmd->add_option("--label-column", o.label_column, "label column name")
        ->each([&](const std::string&) { o.has_label = true; });
    cmd->add_option("--detector", o.detector, "ae-mse or pae-pre")->each([&](const std::string&) {
        o.has_detector = true;
    });
    cmd->add_option("--scorer", o.scorer, "mse, apre, mss-mse or mss-apre")
        ->each([&](const std::string&) { o.has_scorer = true; });
    cmd->add_option("--k", o.k, "neighbor count, or 'auto'")->each([&](const std::string&) {
        o.has_k = true;
    });
    cmd->add_option("--alpha", o.alpha, "bias weight")->each([&](const std::string&) {
        o.has_alpha = true;
    });
    cmd->add_option("--beta", o.beta, "uncertainty weight")->each([&](const std::string&) {
        o.has_beta = true;
    });
    cmd->add_option("--m", o.m, "mean-shift iterations")->each([&](const std::string&) {
        o.has_m = true;
    });
    cmd->add_option("--s1", o.s1, "k-selection runs")->each([&](const std::string&) {
        o.has_s1 = true;
    });
    cmd->add_option("--s2", o.s2, "ensemble training runs")->each([&](const std::string&) {
        o.has_s2 = true;
    });
    cmd->add_option("--sb", o.sb, "ensemble members retained")->each([&](const std::string&) {
        o.has_sb = true;
    });
    cmd->add_option("--epochs", o.epochs, "training epochs")->each([&](const std::string&) {
        o.has_epochs = true;
    });
    cmd->add_option("--lr", o.lr, "learning rate")->each([&](const std::string&) {
        o.has_lr = true;
    });
    cmd->add_option("--seed", o.seed, "master seed")->each([&](const std::string&) {
        o.has_seed = true;
    });
    cmd->add_option("--outdir", o.outdir, "output directory")->each([&](const std::string&) {
        o.has_outdir = true;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"odkit - tabular outlier detection toolkit"};
    app.require_subcommand(1);

    PrepareOpts prep;
    CLI::App* c_prep = app.add_subcommand("prepare", "split a labeled CSV and fit normalization");
    c_prep->add_option("--input", prep.input, "labeled CSV path")->required();
    c_prep->add_option("--label-column", prep.label_column, "label column name");
    c_prep->add_option("--seed", prep.seed, "split seed");
    c_prep->add_option("--outdir", prep.outdir, "output directory")
        ->each([&](const std::string&) { prep.outdir_set = true; });

    SynthOpts synth;
    CLI::App* c_synth = app.add_subcommand("synth", "generate a planted 2-D scenario");
    c_synth->add_option("--inliers", synth.spec.inliers, "inlier count");
    c_synth->add_option("--outliers", synth.spec.outliers, "outlier count");
    c_synth->add_option("--sd-major", synth.spec.sd_major, "inlier SD along the first axis");
    c_synth->add_option("--sd-minor", synth.spec.sd_minor, "inlier SD along the second axis");
    c_synth->add_option("--placement", synth.placement, "far-bias or near-low-bias");
    c_synth->add_option("--far-margin", synth.spec.far_margin,
                        "far-bias radius multiple of the furthest inlier");
    c_synth->add_option("--far-jitter", synth.spec.far_jitter,
                        "far-bias angular jitter as a fraction (< 1) of the slot axis clearance");
    c_synth->add_option("--near-axis-pos", synth.spec.near_axis_pos,
                        "near-low-bias cluster center in sd-major units along the first axis");
    c_synth->add_option("--near-perp-offset", synth.spec.near_perp_offset,
                        "near-low-bias cluster offset in sd-minor units off the axis");
    c_synth->add_option("--near-jitter", synth.spec.near_jitter,
                        "near-low-bias cluster jitter as a fraction of each axis SD");
    c_synth->add_option("--seed", synth.spec.seed, "generator seed");
    c_synth->add_option("--outdir", synth.outdir, "output directory")
        ->each([&](const std::string&) { synth.outdir_set = true; });

    BenchOpts selk;
    CLI::App* c_selk = app.add_subcommand("select-k", "run the k-selection step only");
    add_bench_flags(c_selk, selk);

    TrainOpts tr;
    CLI::App* c_train = app.add_subcommand("train", "train one detector, save a checkpoint");
    c_train->add_option("--input", tr.input, "labeled CSV path")->required();
    c_train->add_option("--label-column", tr.label_column, "label column name");
    c_train->add_option("--detector", tr.detector, "ae-mse or pae-pre");
    c_train->add_option("--scorer", tr.scorer, "validation scorer");
    c_train->add_option("--k", tr.k, "neighbor count (mean-shift scorers)");
    c_train->add_option("--m", tr.m, "mean-shift iterations");
    c_train->add_option("--alpha", tr.alpha, "bias weight");
    c_train->add_option("--beta", tr.beta, "uncertainty weight");
    c_train->add_option("--epochs", tr.epochs, "training epochs");
    c_train->add_option("--lr", tr.lr, "learning rate");
    c_train->add_option("--seed", tr.seed, "master seed");
    c_train->add_option("--out", tr.out, "checkpoint path");

    ScoreOpts sc;
    CLI::App* c_score = app.add_subcommand("score", "score a CSV with a checkpoint");
    c_score->add_option("--checkpoint", sc.checkpoint, "checkpoint path")->required();
    c_score->add_option("--input", sc.input, "CSV to score")->required();
    c_score->add_option("--label-column", sc.label_column, "column to drop before scoring");
    c_score->add_option("--norm-stats", sc.norm_stats, "normalization stats JSON to apply");
    c_score->add_option("--scorer", sc.scorer, "mse, apre, mss-mse or mss-apre");
    c_score->add_option("--train-csv", sc.train_csv, "training CSV (mean-shift scorers)");
    c_score->add_option("--k", sc.k, "neighbor count (mean-shift scorers)");
    c_score->add_option("--m", sc.m, "mean-shift iterations");
    c_score->add_option("--alpha", sc.alpha, "bias weight");
    c_score->add_option("--beta", sc.beta, "uncertainty weight");
    c_score->add_option("--out", sc.out, "output scores CSV");

    BenchOpts bench;
    CLI::App* c_bench = app.add_subcommand("benchmark", "full two-step benchmark pipeline");
    add_bench_flags(c_bench, bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_prep)) cmd_prepare(prep);
        if (app.got_subcommand(c_synth)) cmd_synth(synth);
        if (app.got_subcommand(c_selk)) cmd_select_k(selk);
        if (app.got_subcommand(c_train)) cmd_train(tr);
        if (app.got_subcommand(c_score)) cmd_score(sc);
        if (app.got_subcommand(c_bench)) cmd_benchmark(bench);
    } catch (const odkit::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const odkit::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const odkit::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
