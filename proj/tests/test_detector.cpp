// test_detector.cpp - losses, scores and the training loop.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include <odkit/dataset.hpp>
#include <odkit/detector.hpp>
#include <odkit/eval.hpp>
#include <odkit/synth.hpp>

#include "oracles.hpp"

using odkit::Matrix;

TEST_CASE("mse_loss sums squared residuals over the batch", "[detector]") {
    const Matrix x = Matrix::from_rows({{1.0, 2.0}, {0.0, -1.0}});
    const Matrix mu = Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}});
    CHECK(odkit::mse_loss(x, mu) == 1.0 + 4.0 + 0.0 + 1.0);
    CHECK_THROWS_AS(odkit::mse_loss(x, Matrix(1, 2)), odkit::DataError);
}

TEST_CASE("pre_loss evaluates bias/sigma plus log sigma", "[detector]") {
    // single attribute: x=1, mu=0, sigma=0.5 -> 1/0.5 + ln 0.5 = 2 - ln 2
    const Matrix x = Matrix::from_rows({{1.0}});
    const Matrix mu = Matrix::from_rows({{0.0}});
    const Matrix sigma = Matrix::from_rows({{0.5}});
    CHECK_THAT(odkit::pre_loss(x, mu, sigma),
               Catch::Matchers::WithinRel(2.0 - std::log(2.0), 1e-15));
    SECTION("nonpositive sigma aborts") {
        CHECK_THROWS_AS(odkit::pre_loss(x, mu, Matrix::from_rows({{0.0}})), odkit::NumericError);
        CHECK_THROWS_AS(odkit::pre_loss(x, mu, Matrix::from_rows({{-1.0}})), odkit::NumericError);
    }
}

TEST_CASE("pre_loss with unit sigma reduces to mse_loss exactly", "[detector]") {
    odkit::Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rng.uniform_int(6), d = 1 + rng.uniform_int(5);
        Matrix x(n, d), mu(n, d), ones(n, d, 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.data()[i] = rng.gaussian(0.0, 3.0);
            mu.data()[i] = rng.gaussian(0.0, 3.0);
        }
        CHECK(odkit::pre_loss(x, mu, ones) == odkit::mse_loss(x, mu));
    }
}

TEST_CASE("pre_loss_grad matches hand values and finite differences", "[detector]") {
    const Matrix x = Matrix::from_rows({{1.0}});
    const Matrix mu = Matrix::from_rows({{0.0}});
    const Matrix sigma = Matrix::from_rows({{0.5}});
    const odkit::PreLossGrad g = odkit::pre_loss_grad(x, mu, sigma);
    CHECK(g.d_mu(0, 0) == -4.0);     // -2(x-mu)/sigma
    CHECK(g.d_sigma(0, 0) == -2.0);  // -(x-mu)^2/sigma^2 + 1/sigma

    odkit::Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix xr(2, 3), mur(2, 3), sr(2, 3);
        for (std::size_t i = 0; i < xr.size(); ++i) {
            xr.data()[i] = rng.gaussian();
            mur.data()[i] = rng.gaussian();
            sr.data()[i] = 0.1 + rng.uniform();
        }
        const odkit::PreLossGrad gr = odkit::pre_loss_grad(xr, mur, sr);
        for (std::size_t i = 0; i < xr.size(); ++i) {
            const double fd_mu = oracle::central_diff(
                [&](double v) {
                    Matrix m2 = mur;
                    m2.data()[i] = v;
                    return odkit::pre_loss(xr, m2, sr);
                },
                mur.data()[i], 1e-6);
            const double fd_sigma = oracle::central_diff(
                [&](double v) {
                    Matrix s2 = sr;
                    s2.data()[i] = v;
                    return odkit::pre_loss(xr, mur, s2);
                },
                sr.data()[i], 1e-7);
            CHECK_THAT(gr.d_mu.data()[i], Catch::Matchers::WithinAbs(fd_mu, 1e-5));
            CHECK_THAT(gr.d_sigma.data()[i], Catch::Matchers::WithinAbs(fd_sigma, 1e-4));
        }
    }
}

TEST_CASE("per-sample scores", "[detector]") {
    const std::vector<double> x{3.0, 4.0}, mu{0.0, 0.0}, ones{1.0, 1.0};
    CHECK(odkit::mse_score(x, mu) == 25.0);
    // alpha=1, beta=1, sigma=1: score = (x-mu)^2 summed
    CHECK(odkit::apre_score(x, mu, ones, {1.0, 1.0}) == 25.0);
    // weights scale the two terms independently
    const std::vector<double> sigma{0.5, 2.0};
    const double bias = 9.0 / 0.5 + 16.0 / 2.0;
    const double unc = std::log(0.5) + std::log(2.0);
    CHECK_THAT(odkit::apre_score(x, mu, sigma, {0.5, 2.0}),
               Catch::Matchers::WithinRel(0.5 * bias + 2.0 * unc, 1e-15));
    const std::vector<double> short_sigma{1.0}, zero_sigma{1.0, 0.0};
    CHECK_THROWS_AS(odkit::apre_score(x, mu, short_sigma, {1.0, 1.0}), odkit::DataError);
    CHECK_THROWS_AS(odkit::apre_score(x, mu, zero_sigma, {1.0, 1.0}), odkit::NumericError);
}

TEST_CASE("apre_score is linear in the weight pair, preserving rankings", "[detector]") {
    odkit::Rng rng(17);
    std::vector<std::vector<double>> xs, mus, sigmas;
    for (int i = 0; i < 12; ++i) {
        xs.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
        mus.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
        sigmas.push_back({0.2 + rng.uniform(), 0.2 + rng.uniform(), 0.2 + rng.uniform()});
    }
    const odkit::ScoreWeights w{0.5, 2.0};
    const double c = 3.25;
    std::vector<double> base, scaled;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        base.push_back(odkit::apre_score(xs[i], mus[i], sigmas[i], w));
        scaled.push_back(odkit::apre_score(xs[i], mus[i], sigmas[i], {c * w.alpha, c * w.beta}));
        CHECK_THAT(scaled.back(), Catch::Matchers::WithinRel(c * base.back(), 1e-12));
    }
    std::vector<std::size_t> order_a(xs.size()), order_b(xs.size());
    std::iota(order_a.begin(), order_a.end(), 0u);
    order_b = order_a;
    std::sort(order_a.begin(), order_a.end(), [&](auto i, auto j) { return base[i] < base[j]; });
    std::sort(order_b.begin(), order_b.end(), [&](auto i, auto j) { return scaled[i] < scaled[j]; });
    CHECK(order_a == order_b);
}

TEST_CASE("apre_score turns from decreasing to increasing at alpha*(x-mu)^2/beta", "[detector]") {
    // single attribute: f(s) = alpha*b/s + beta*ln s has its minimum at
    // s* = alpha*b/beta (calculus on the implemented formula)
    const double alpha = 0.5, beta = 2.0;
    const std::vector<double> x{2.0}, mu{0.0};
    const double b = (x[0] - mu[0]) * (x[0] - mu[0]);
    const double s_star = alpha * b / beta;
    auto f = [&](double s) {
        const std::vector<double> sigma{s};
        return odkit::apre_score(x, mu, sigma, {alpha, beta});
    };
    double prev = f(s_star / 16.0);
    for (double s = s_star / 8.0; s < s_star * 0.999; s *= 2.0) {
        CHECK(f(s) < prev);
        prev = f(s);
    }
    prev = f(s_star * 1.001);
    for (double s = s_star * 2.0; s < s_star * 16.0; s *= 2.0) {
        CHECK(f(s) > prev);
        prev = f(s);
    }
}

TEST_CASE("reconstruct splits the doubled head into mean and scale", "[detector]") {
    const odkit::NetworkParams p = odkit::init_params(odkit::build_schedule(3, true), 8);
    Matrix x(2, 3);
    const odkit::Reconstruction rec = odkit::reconstruct(odkit::DetectorKind::PaePre, p, x);
    CHECK(rec.mu.cols() == 3);
    CHECK(rec.sigma.cols() == 3);
    for (std::size_t i = 0; i < rec.sigma.size(); ++i) CHECK(rec.sigma.data()[i] >= 1e-6);

    const odkit::Reconstruction ae =
        odkit::reconstruct(odkit::DetectorKind::AeMse, odkit::init_params(odkit::build_schedule(3, false), 8), x);
    CHECK(ae.mu.cols() == 3);
    CHECK(ae.sigma.empty());
}

namespace {

odkit::Dataset normalized_synth(odkit::SynthSpec spec) {
    const odkit::Dataset d = odkit::generate_synthetic(spec);
    return odkit::apply_normalizer(odkit::fit_normalizer(d), d);
}

}  // namespace

TEST_CASE("train with zero epochs returns the evaluated initialization", "[detector]") {
    const odkit::Dataset d = normalized_synth({.seed = 21});
    const auto scorer = odkit::make_apre_validation_scorer(d.values, {0.5, 2.0});
    const odkit::DetectorModel m = odkit::train(odkit::DetectorKind::PaePre, d.values, d.values,
                                                d.labels, scorer, 0, 0.001, 99);
    CHECK(m.best_epoch == 0);
    const odkit::NetworkParams init = odkit::init_params(odkit::build_schedule(2, true), 99);
    CHECK(m.params.weights[0] == init.weights[0]);
    CHECK(m.params.weights[1] == init.weights[1]);
    CHECK(m.best_validation_auc >= 0.0);
    CHECK(m.best_validation_auc <= 1.0);
}

TEST_CASE("training reduces the probabilistic loss on the planted scenario", "[detector]") {
    const odkit::Dataset d = normalized_synth({.seed = 33});
    const auto scorer = odkit::make_apre_validation_scorer(d.values, {0.5, 2.0});
    const odkit::DetectorModel m = odkit::train(odkit::DetectorKind::PaePre, d.values, d.values,
                                                d.labels, scorer, 300, 0.001, 7);
    const odkit::NetworkParams init = odkit::init_params(odkit::build_schedule(2, true), 7);
    auto loss_of = [&](const odkit::NetworkParams& p) {
        const odkit::Reconstruction rec = odkit::reconstruct(odkit::DetectorKind::PaePre, p, d.values);
        return odkit::pre_loss(d.values, rec.mu, rec.sigma);
    };
    CHECK(loss_of(m.params) < loss_of(init));
    CHECK(m.best_epoch > 0);
}

TEST_CASE("train is deterministic in the seed", "[detector]") {
    const odkit::Dataset d = normalized_synth({.seed = 13});
    const auto scorer = odkit::make_mse_validation_scorer(d.values);
    const odkit::DetectorModel a = odkit::train(odkit::DetectorKind::AeMse, d.values, d.values,
                                                d.labels, scorer, 40, 0.001, 5);
    const odkit::DetectorModel b = odkit::train(odkit::DetectorKind::AeMse, d.values, d.values,
                                                d.labels, scorer, 40, 0.001, 5);
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_validation_auc == b.best_validation_auc);
    for (std::size_t l = 0; l < a.params.weights.size(); ++l)
        CHECK(a.params.weights[l] == b.params.weights[l]);
    const odkit::DetectorModel c = odkit::train(odkit::DetectorKind::AeMse, d.values, d.values,
                                                d.labels, scorer, 40, 0.001, 6);
    CHECK(a.params.weights[0] != c.params.weights[0]);
}

TEST_CASE("train aborts with epoch diagnostics when the loss explodes", "[detector]") {
    // squared magnitudes around 1e160 overflow the squared-error loss
    Matrix big(4, 2);
    for (std::size_t i = 0; i < big.size(); ++i) big.data()[i] = 1e160;
    const odkit::Dataset val = normalized_synth({.seed = 2});
    const auto scorer = odkit::make_mse_validation_scorer(val.values);
    CHECK_THROWS_WITH(odkit::train(odkit::DetectorKind::AeMse, big, val.values, val.labels, scorer,
                                   5, 0.001, 1),
                      Catch::Matchers::ContainsSubstring("epoch"));
}

TEST_CASE("score_all matches direct per-row scoring", "[detector]") {
    const odkit::Dataset d = normalized_synth({.seed = 41});
    const auto scorer = odkit::make_apre_validation_scorer(d.values, {0.5, 2.0});
    const odkit::DetectorModel m = odkit::train(odkit::DetectorKind::PaePre, d.values, d.values,
                                                d.labels, scorer, 30, 0.001, 3);
    const odkit::RowScorer row_scorer = odkit::make_row_scorer(odkit::ScorerKind::Apre, {0.5, 2.0});
    const std::vector<double> scores = odkit::score_all(m, d.values, row_scorer);
    REQUIRE(scores.size() == d.n());
    const odkit::Reconstruction rec = odkit::reconstruct(m.kind, m.params, d.values);
    for (std::size_t i = 0; i < d.n(); ++i)
        CHECK(scores[i] == odkit::apre_score(d.values.row(i), rec.mu.row(i), rec.sigma.row(i),
                                             {0.5, 2.0}));
    CHECK(odkit::score_all(m, d.values, row_scorer) == scores);  // pure
}

TEST_CASE("model persistence round-trips through checkpoints", "[detector]") {
    const odkit::Dataset d = normalized_synth({.seed = 51});
    const auto scorer = odkit::make_mse_validation_scorer(d.values);
    const odkit::DetectorModel m = odkit::train(odkit::DetectorKind::AeMse, d.values, d.values,
                                                d.labels, scorer, 20, 0.001, 11);
    const std::string path = (std::filesystem::temp_directory_path() / "odkit_model.ckpt").string();
    odkit::save_model(path, m);
    const odkit::DetectorModel back = odkit::load_model(path);
    CHECK(back.kind == m.kind);
    CHECK(back.best_epoch == m.best_epoch);
    CHECK(back.best_validation_auc == m.best_validation_auc);
    CHECK(back.seed == m.seed);
    for (std::size_t l = 0; l < m.params.weights.size(); ++l)
        CHECK(back.params.weights[l] == m.params.weights[l]);
    std::remove(path.c_str());
}
