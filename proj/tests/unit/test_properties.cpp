#include <catch_amalgamated.hpp>

#include "dbfgm/inference.hpp"
#include "dbfgm/sampler.hpp"
#include "dbfgm/simulate.hpp"

#include <algorithm>

using namespace dbfgm;

namespace {

struct Fitted {
    FunctionalDataset data;
    GroundTruth truth;
    PosteriorSamples samples;
};

const Fitted& fitted() {
    static const Fitted f = [] {
        SimConfig sim;
        sim.n = 200;
        sim.p = 4;
        sim.T = 50;
        sim.K = 2;
        sim.taus = {};
        sim.edge_prob = 0.5;
        sim.seed = 21;
        auto [data, truth] = generate_dataset(sim);
        Hyperparameters hp;
        hp.K = 2;
        hp.S = 1;
        ChainConfig cfg;
        cfg.total_iters = 1500;
        cfg.burn_in = 500;
        const auto basis = polynomial_basis(data.time_grid(), 2);
        auto samples = run_chain(data, basis, hp, cfg);
        return Fitted{std::move(data), std::move(truth), std::move(samples)};
    }();
    return f;
}

}  // namespace

TEST_CASE("Raising the threshold never adds an edge", "[properties]") {
    const auto P = edge_probabilities(fitted().samples, 0);
    Graph prev_coef = median_graph(P, 0.0);
    Graph prev_func = functional_graph(prev_coef, 4, 2);
    for (double thr = 0.05; thr <= 1.0; thr += 0.05) {
        const auto coef = median_graph(P, thr);
        const auto func = functional_graph(coef, 4, 2);
        REQUIRE(((coef.array() <= prev_coef.array())).all());
        REQUIRE(((func.array() <= prev_func.array())).all());
        prev_coef = coef;
        prev_func = func;
    }
}

TEST_CASE("Edge probabilities ignore the order of stored draws", "[properties]") {
    auto shuffled = fitted().samples;
    Rng rng(4);
    auto& recs = shuffled.records;
    for (std::size_t k = recs.size() - 1; k > 0; --k) {
        std::swap(recs[k], recs[static_cast<std::size_t>(rng.uniform() * static_cast<double>(k + 1))]);
    }
    REQUIRE(edge_probabilities(shuffled, 0) == edge_probabilities(fitted().samples, 0));
    REQUIRE(functional_edge_probabilities(shuffled, 0) == functional_edge_probabilities(fitted().samples, 0));
}

TEST_CASE("Per-draw functional probabilities dominate every coefficient probability in the block",
          "[properties]") {
    const auto P = edge_probabilities(fitted().samples, 0);
    const auto F = functional_edge_probabilities(fitted().samples, 0);
    for (Index a = 0; a < 4; ++a) {
        for (Index b = a + 1; b < 4; ++b) REQUIRE(F(a, b) >= P.block(a * 2, b * 2, 2, 2).maxCoeff());
    }
}

TEST_CASE("Relabelling functions permutes the well-separated posterior graph", "[properties]") {
    const auto& f = fitted();
    const std::vector<int> perm{2, 0, 3, 1};  // new function j holds old function perm[j]
    auto permuted = f.data;
    for (int i = 0; i < f.data.n(); ++i) {
        for (int j = 0; j < 4; ++j) {
            for (int t = 0; t < f.data.T(); ++t) permuted(i, j, t) = f.data(i, perm[static_cast<std::size_t>(j)], t);
        }
    }
    Hyperparameters hp;
    hp.K = 2;
    hp.S = 1;
    ChainConfig cfg;
    cfg.total_iters = 1500;
    cfg.burn_in = 500;
    const auto basis = polynomial_basis(permuted.time_grid(), 2);
    const auto ps = run_chain(permuted, basis, hp, cfg);
    const auto P0 = edge_probabilities(f.samples, 0);
    const auto P1 = edge_probabilities(ps, 0);
    const auto G0 = estimate_graph(f.samples, 0).func_graph;
    const auto G1 = estimate_graph(ps, 0).func_graph;
    int compared = 0;
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
            const int oa = perm[static_cast<std::size_t>(a)], ob = perm[static_cast<std::size_t>(b)];
            // The median functional edge is decided by the largest coefficient probability of the block.
            const double p0 = P0.block(oa * 2, ob * 2, 2, 2).maxCoeff();
            const double p1 = P1.block(a * 2, b * 2, 2, 2).maxCoeff();
            if (std::min(std::abs(p0 - 0.5), std::abs(p1 - 0.5)) < 0.15) continue;
            REQUIRE(G1(a, b) == G0(oa, ob));
            ++compared;
        }
    }
    REQUIRE(compared >= 4);
}

TEST_CASE("Posterior median graph recovers a strong-signal truth", "[properties]") {
    const auto& f = fitted();
    const auto est = estimate_graph(f.samples, 0).func_graph;
    int agree = 0;
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) agree += est(a, b) == f.truth.func_graphs[0](a, b) ? 1 : 0;
    }
    REQUIRE(agree >= 5);
}
