#include <catch_amalgamated.hpp>

#include "dbfgm/simulate.hpp"

#include <cmath>

using namespace dbfgm;

TEST_CASE("Default simulation has the study dimensions", "[simulate]") {
    SimConfig cfg;
    cfg.n = 3;
    const auto [data, truth] = generate_dataset(cfg);
    REQUIRE(data.n() == 3);
    REQUIRE(data.p() == 15);
    REQUIRE(data.T() == 256);
    REQUIRE(truth.func_graphs.size() == 2);
    REQUIRE(truth.changepoints.taus == std::vector<int>{129});
    REQUIRE(truth.precisions.front().rows() == 75);
    REQUIRE_NOTHROW(validate_dataset(data));
}

TEST_CASE("Edge density averages 2 / (p - 1)", "[simulate][property]") {
    // 105 pairs at probability 1/7: expected 15 edges per graph.
    Rng rng(3);
    double total = 0.0;
    const int N = 2000;
    for (int k = 0; k < N; ++k) total += random_functional_graph(15, 2.0 / 14.0, rng).cast<double>().sum() / 2.0;
    const double sd = std::sqrt(105.0 * (1.0 / 7.0) * (6.0 / 7.0) / N);
    REQUIRE(std::abs(total / N - 15.0) <= 4.0 * sd);
}

TEST_CASE("Error-free curves are continuous at the changepoint", "[simulate][property]") {
    for (auto kind : {BasisKind::polynomial, BasisKind::bspline}) {
        SimConfig cfg;
        cfg.n = 4;
        cfg.p = 5;
        cfg.T = 60;
        cfg.taus = {20, 41};
        cfg.basis = kind;
        cfg.degree = 2;
        cfg.seed = 8;
        const auto [data, truth] = generate_dataset(cfg);
        const auto basis = simulation_basis(cfg);
        for (std::size_t m = 0; m < cfg.taus.size(); ++m) {
            const int t0 = cfg.taus[m] - 1;
            for (int i = 0; i < cfg.n; ++i) {
                for (int j = 0; j < cfg.p; ++j) {
                    const double before = truth.curve(basis, static_cast<int>(m), i, j, t0);
                    const double after = truth.curve(basis, static_cast<int>(m) + 1, i, j, t0);
                    REQUIRE(std::abs(before - after) <= 1e-12 * std::max(1.0, std::abs(before)));
                }
            }
        }
    }
}

TEST_CASE("Zero noise reproduces the error-free curves exactly", "[simulate]") {
    SimConfig cfg;
    cfg.n = 2;
    cfg.p = 4;
    cfg.T = 40;
    cfg.taus = {15};
    cfg.noise_sd = 0.0;
    const auto [data, truth] = generate_dataset(cfg);
    const auto basis = simulation_basis(cfg);
    for (int i = 0; i < cfg.n; ++i) {
        for (int j = 0; j < cfg.p; ++j) {
            for (int t = 0; t < cfg.T; ++t) {
                const int s = segment_of(t + 1, truth.changepoints, cfg.T) - 1;
                REQUIRE(data(i, j, t) == truth.curve(basis, s, i, j, t));
            }
        }
    }
}

TEST_CASE("Residual standard deviation matches noise_sd", "[simulate][property]") {
    SimConfig cfg;
    cfg.n = 20;
    cfg.noise_sd = 0.05;
    const auto [data, truth] = generate_dataset(cfg);
    const auto basis = simulation_basis(cfg);
    double ss = 0.0;
    long count = 0;
    for (int i = 0; i < cfg.n; ++i) {
        for (int j = 0; j < cfg.p; ++j) {
            for (int t = 0; t < cfg.T; ++t) {
                const int s = segment_of(t + 1, truth.changepoints, cfg.T) - 1;
                const double r = data(i, j, t) - truth.curve(basis, s, i, j, t);
                ss += r * r;
                ++count;
            }
        }
    }
    REQUIRE(std::abs(std::sqrt(ss / count) / 0.05 - 1.0) <= 0.02);
}

TEST_CASE("Same seed gives identical data, different seeds differ", "[simulate]") {
    SimConfig cfg;
    cfg.n = 3;
    cfg.p = 4;
    cfg.T = 30;
    cfg.taus = {10};
    const auto a = generate_dataset(cfg).first;
    const auto b = generate_dataset(cfg).first;
    REQUIRE(a.values() == b.values());
    cfg.seed = 2;
    REQUIRE(generate_dataset(cfg).first.values() != a.values());
}

TEST_CASE("Truth precisions respect the block structure of the graph", "[simulate][property]") {
    SimConfig cfg;
    cfg.n = 2;
    cfg.p = 6;
    cfg.T = 30;
    cfg.taus = {12};
    cfg.edge_prob = 0.4;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.seed = seed;
        const auto truth = generate_dataset(cfg).second;
        for (std::size_t s = 0; s < truth.precisions.size(); ++s) {
            const auto& W = truth.precisions[s];
            const auto& g = truth.func_graphs[s];
            for (int a = 0; a < cfg.p; ++a) {
                for (int b = a + 1; b < cfg.p; ++b) {
                    if (!g(a, b)) REQUIRE(W.block(a * cfg.K, b * cfg.K, cfg.K, cfg.K).isZero(0.0));
                }
            }
        }
    }
}

TEST_CASE("Invalid simulation settings are rejected", "[simulate]") {
    SimConfig cfg;
    cfg.taus = {1};
    REQUIRE_THROWS_AS(generate_dataset(cfg), ValidationError);
    cfg.taus = {129};
    cfg.noise_sd = -1.0;
    REQUIRE_THROWS_AS(generate_dataset(cfg), ValidationError);
}
