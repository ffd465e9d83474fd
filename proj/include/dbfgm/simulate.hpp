#pragma once

#include "dbfgm/basis.hpp"
#include "dbfgm/core_types.hpp"
#include "dbfgm/gwishart.hpp"
#include "dbfgm/random.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace dbfgm {

/// Synthetic-data settings. Defaults reproduce the simulation study.
struct SimConfig {
    int n = 50;
    int p = 15;
    int T = 256;
    int K = 5;
    std::vector<int> taus{129};
    std::optional<double> edge_prob;  // default 2 / (p - 1)
    double noise_sd = 0.05;
    BasisKind basis = BasisKind::polynomial;
    int degree = 4;  // used by the bspline kind only; polynomial degree is K - 1
    double gwishart_df = 3.0;
    std::uint64_t seed = 1;

    double resolved_edge_prob() const { return edge_prob.value_or(p > 1 ? 2.0 / (p - 1) : 0.0); }
    int segments() const noexcept { return static_cast<int>(taus.size()) + 1; }
};

inline void validate_sim_config(const SimConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& reason) {
        throw ValidationError("InvalidConfig", "invalid " + field + ": " + reason, {{"field", field}, {"reason", reason}});
    };
    if (cfg.n < 1 || cfg.p < 1 || cfg.T < 2 || cfg.K < 1) fail("n/p/T/K", "must be positive (T >= 2)");
    const double e = cfg.resolved_edge_prob();
    if (!(e >= 0 && e <= 1)) fail("edge_prob", "must lie in [0, 1]");
    if (!(cfg.noise_sd >= 0)) fail("noise_sd", "must be nonnegative");
    int prev = 1;
    for (int tau : cfg.taus) {
        if (tau <= prev || tau >= cfg.T) fail("taus", "need 1 < tau_1 < ... < T");
        prev = tau;
    }
}

/// Simulated ground truth, per segment.
struct GroundTruth {
    std::vector<Graph> func_graphs;   // p x p
    std::vector<Matrix> precisions;   // pK x pK
    std::vector<Matrix> coeffs;       // n x pK
    ChangepointVector changepoints;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    int p = 0;
    int K = 0;

    /// Error-free curve value of replicate i, function j at 0-based time t
    /// under the coefficients of 0-based segment s.
    double curve(const BasisMatrix& basis, int s, int i, int j, int t) const {
        return basis.values.row(t).dot(coeffs[static_cast<std::size_t>(s)].row(i).segment(static_cast<Index>(j) * K, K));
    }
};

/// Erdos-Renyi adjacency: each pair present independently with `edge_prob`.
inline Graph random_functional_graph(int p, double edge_prob, Rng& rng) {
    if (!(edge_prob >= 0 && edge_prob <= 1)) {
        throw ValidationError("InvalidConfig", "edge probability must lie in [0, 1]", {{"field", "edge_prob"}});
    }
    Graph g = Graph::Zero(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) {
            const std::uint8_t bit = rng.uniform() < edge_prob ? 1 : 0;
            g(a, b) = g(b, a) = bit;
        }
    }
    return g;
}

/// Shift each segment s >= 2 so that its error-free curves meet those of
/// segment s - 1 at the changepoint between them. Segment 1 stays fixed; the
/// shift is carried by the basis' constant representation.
inline GroundTruth continuity_correct(GroundTruth truth, const BasisMatrix& basis) {
    if (truth.changepoints.taus.empty()) return truth;
    const auto w = basis.constant_coefficients();
    if (!w) throw ValidationError("NoConstantTerm", "basis cannot represent a constant shift");
    const int K = truth.K;
    const Index n = truth.coeffs.front().rows();
    for (std::size_t s = 1; s < truth.coeffs.size(); ++s) {
        const int t0 = truth.changepoints.taus[s - 1] - 1;
        const auto row = basis.values.row(t0);
        for (Index i = 0; i < n; ++i) {
            for (int j = 0; j < truth.p; ++j) {
                const double before = row.dot(truth.coeffs[s - 1].row(i).segment(static_cast<Index>(j) * K, K));
                const double after = row.dot(truth.coeffs[s].row(i).segment(static_cast<Index>(j) * K, K));
                truth.coeffs[s].row(i).segment(static_cast<Index>(j) * K, K) += (before - after) * w->transpose();
            }
        }
    }
    return truth;
}

namespace detail {
enum SimStream : std::uint64_t { sim_structure = 1, sim_coefficients = 2, sim_noise = 3 };
}

inline std::vector<double> unit_time_grid(int T) {
    std::vector<double> grid(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) grid[static_cast<std::size_t>(t)] = t + 1.0;
    return grid;
}

inline BasisMatrix simulation_basis(const SimConfig& cfg) {
    const auto grid = unit_time_grid(cfg.T);
    return make_basis(cfg.basis, grid, cfg.K, cfg.degree);
}

/// Full synthetic pipeline: per-segment random graph -> block expansion ->
/// G-Wishart precision -> coefficients -> continuity correction -> noise.
inline std::pair<FunctionalDataset, GroundTruth> generate_dataset(const SimConfig& cfg) {
    validate_sim_config(cfg);
    const int S = cfg.segments();
    const auto basis = simulation_basis(cfg);
    const Index q = static_cast<Index>(cfg.p) * cfg.K;

    GroundTruth truth;
    truth.changepoints.taus = cfg.taus;
    truth.noise_sd = cfg.noise_sd;
    truth.seed = cfg.seed;
    truth.p = cfg.p;
    truth.K = cfg.K;

    Rng structure = Rng::substream(cfg.seed, {detail::sim_structure});
    std::vector<Matrix> cov_factor;  // upper Cholesky factor U of Omega = U'U
    for (int s = 0; s < S; ++s) {
        truth.func_graphs.push_back(random_functional_graph(cfg.p, cfg.resolved_edge_prob(), structure));
        const auto cg = expand_graph(truth.func_graphs.back(), cfg.K);
        GWishartOptions gw;
        gw.df = cfg.gwishart_df;
        truth.precisions.push_back(sample_gwishart(cg, gw, structure));
        cov_factor.push_back(Eigen::LLT<Matrix>(truth.precisions.back()).matrixU());
    }

    // c = U^{-1} z has covariance (U'U)^{-1} = Omega^{-1}.
    truth.coeffs.assign(static_cast<std::size_t>(S), Matrix(cfg.n, q));
    for (int i = 0; i < cfg.n; ++i) {
        Rng rng = Rng::substream(cfg.seed, {detail::sim_coefficients, static_cast<std::uint64_t>(i)});
        for (int s = 0; s < S; ++s) {
            Vector z = rng.standard_normal(q);
            cov_factor[static_cast<std::size_t>(s)].triangularView<Eigen::Upper>().solveInPlace(z);
            truth.coeffs[static_cast<std::size_t>(s)].row(i) = z.transpose();
        }
    }
    truth = continuity_correct(std::move(truth), basis);

    auto data = FunctionalDataset::zeros(cfg.n, cfg.p, cfg.T);
    for (int i = 0; i < cfg.n; ++i) {
        Rng rng = Rng::substream(cfg.seed, {detail::sim_noise, static_cast<std::uint64_t>(i)});
        for (int s = 0; s < S; ++s) {
            const auto [b, e] = truth.changepoints.range(s, cfg.T);
            const auto& C = truth.coeffs[static_cast<std::size_t>(s)];
            for (int j = 0; j < cfg.p; ++j) {
                const Vector coef = C.row(i).segment(static_cast<Index>(j) * cfg.K, cfg.K).transpose();
                for (int t = b; t < e; ++t) data(i, j, t) = basis.values.row(t).dot(coef);
            }
        }
        if (cfg.noise_sd > 0) {
            for (int j = 0; j < cfg.p; ++j) {
                for (int t = 0; t < cfg.T; ++t) data(i, j, t) += cfg.noise_sd * rng.normal();
            }
        }
    }
    return {std::move(data), std::move(truth)};
}

}  // namespace dbfgm
