#pragma once

#include "dbfgm/core_types.hpp"
#include "dbfgm/parallel.hpp"
#include "dbfgm/random.hpp"
#include "dbfgm/sampler.hpp"

#include <cmath>
#include <tuple>
#include <vector>

namespace dbfgm {

/// Hyperparameter grid for prior calibration. Cells are the Cartesian
/// product of p, K, h and the Beta prior settings. When `betas` is nonempty
/// each cell uses (alpha, beta) directly; otherwise beta is derived from a
/// prior mean m = alpha / (alpha + beta), with m = value / (p - 1) when
/// `means_per_p` is set.
struct CalibrationGrid {
    std::vector<int> p_values{15};
    std::vector<int> K_values{5};
    std::vector<double> h_values{50.0};
    double alpha = 2.0;
    std::vector<double> betas;
    std::vector<double> prior_means;
    bool means_per_p = false;
    double lambda = 1.0;
    double v0 = 0.02;
    int samples = 20000;
    int warmup = 2000;
    std::uint64_t seed = 1;
};

inline void validate_grid(const CalibrationGrid& g) {
    auto fail = [](const std::string& field, const std::string& reason) {
        throw ValidationError("InvalidConfig", "invalid " + field + ": " + reason, {{"field", field}, {"reason", reason}});
    };
    if (g.p_values.empty() || g.K_values.empty() || g.h_values.empty()) fail("grid", "p, K and h lists must be nonempty");
    if (g.betas.empty() && g.prior_means.empty()) fail("grid", "need betas or prior_means");
    if (g.samples < 1000) fail("samples", "must be at least 1000");
    if (g.warmup < 0) fail("warmup", "must be nonnegative");
    for (int p : g.p_values) {
        if (p < 2) fail("p_values", "need p >= 2");
    }
    for (double m : g.prior_means) {
        if (!(m > 0)) fail("prior_means", "must be positive");
    }
}

struct PriorEdgeEstimate {
    double prob_coef = 0.0;
    double prob_func = 0.0;
    double se_coef = 0.0;
    double se_func = 0.0;
};

namespace detail {
// Mean and batch-means standard error with ceil(sqrt(N)) batches.
inline std::pair<double, double> mean_and_batch_se(const std::vector<double>& x) {
    const auto N = static_cast<long>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / static_cast<double>(N);
    const long B = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(N))));
    const long size = N / B;
    if (B < 2 || size < 1) return {mean, 0.0};
    std::vector<double> bm(static_cast<std::size_t>(B), 0.0);
    for (long k = 0; k < B * size; ++k) bm[static_cast<std::size_t>(k / size)] += x[static_cast<std::size_t>(k)];
    double grand = 0.0;
    for (auto& v : bm) grand += (v /= static_cast<double>(size));
    grand /= static_cast<double>(B);
    double ss = 0.0;
    for (double v : bm) ss += (v - grand) * (v - grand);
    return {mean, std::sqrt(ss / (static_cast<double>(B) * static_cast<double>(B - 1)))};
}
}  // namespace detail

/// Monte Carlo prior edge-inclusion probabilities from a prior-only chain
/// (S = 1): the mean cross-block indicator and the mean any-edge indicator
/// over the p(p-1)/2 function pairs.
inline PriorEdgeEstimate prior_edge_probability(Hyperparameters hp, int p, int samples, int warmup, std::uint64_t seed) {
    hp.S = 1;
    ChainConfig cfg;
    cfg.total_iters = warmup + samples;
    cfg.burn_in = warmup;
    cfg.seed = seed;
    cfg.prior_only = true;
    cfg.keep_records = false;
    const int K = hp.K;
    const auto pairs = static_cast<double>(pair_count(p));
    std::vector<double> coef, func;
    coef.reserve(static_cast<std::size_t>(samples));
    func.reserve(static_cast<std::size_t>(samples));
    run_chain(p, 2, hp, cfg, {}, [&](const IterationRecord&, const GibbsSampler& chain) {
        const auto& g = chain.segments().front().graph;
        double edges = 0.0;
        double blocks = 0.0;
        for (int a = 0; a < p; ++a) {
            for (int b = a + 1; b < p; ++b) {
                const auto blk = g.block(static_cast<Index>(a) * K, static_cast<Index>(b) * K, K, K).cast<double>();
                const double e = blk.sum();
                edges += e;
                blocks += e > 0 ? 1.0 : 0.0;
            }
        }
        coef.push_back(edges / (pairs * K * K));
        func.push_back(blocks / pairs);
    });
    PriorEdgeEstimate out;
    std::tie(out.prob_coef, out.se_coef) = detail::mean_and_batch_se(coef);
    std::tie(out.prob_func, out.se_func) = detail::mean_and_batch_se(func);
    return out;
}

struct CalibrationRow {
    int p = 0;
    int K = 0;
    double h = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double prior_mean = 0.0;
    PriorEdgeEstimate estimate;
};

/// One row per grid cell, in p-major, then K, h, Beta-setting order. Each cell
/// gets its own seed derived from the grid seed and the cell index.
inline std::vector<CalibrationRow> run_grid(const CalibrationGrid& grid) {
    validate_grid(grid);
    std::vector<CalibrationRow> rows;
    const std::size_t settings = grid.betas.empty() ? grid.prior_means.size() : grid.betas.size();
    for (int p : grid.p_values) {
        for (int K : grid.K_values) {
            for (double h : grid.h_values) {
                for (std::size_t k = 0; k < settings; ++k) {
                    CalibrationRow r{p, K, h, grid.alpha, 0.0, 0.0, {}};
                    if (!grid.betas.empty()) {
                        r.beta = grid.betas[k];
                    } else {
                        r.prior_mean = grid.means_per_p ? grid.prior_means[k] / (p - 1) : grid.prior_means[k];
                        if (!(r.prior_mean > 0 && r.prior_mean < 1)) {
                            throw ValidationError("InvalidConfig", "prior mean must lie in (0, 1)", {{"field", "prior_means"}});
                        }
                        r.beta = grid.alpha * (1.0 - r.prior_mean) / r.prior_mean;
                    }
                    r.prior_mean = r.alpha / (r.alpha + r.beta);
                    rows.push_back(r);
                }
            }
        }
    }
    parallel_for(rows.size(), [&](std::size_t c) {
        auto& r = rows[c];
        Hyperparameters hp;
        hp.K = r.K;
        hp.h = r.h;
        hp.alpha = r.alpha;
        hp.beta = r.beta;
        hp.lambda = grid.lambda;
        hp.v0 = grid.v0;
        std::uint64_t state = grid.seed ^ (0x9E3779B97F4A7C15ULL * (c + 1));
        r.estimate = prior_edge_probability(hp, r.p, grid.samples, grid.warmup, splitmix64(state));
    });
    return rows;
}

}  // namespace dbfgm
