#pragma once

#include "dbfgm/basis.hpp"
#include "dbfgm/inference.hpp"
#include "dbfgm/metrics.hpp"
#include "dbfgm/parallel.hpp"
#include "dbfgm/sampler.hpp"
#include "dbfgm/simulate.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace dbfgm {

/// Settings of the simulation-study replication: data from `sim`, fitted
/// with a `fit_basis` expansion of size hp.K.
struct Table1Options {
    int replicates = 10;
    std::uint64_t seed = 1;
    SimConfig sim;
    Hyperparameters hp;
    ChainConfig chain;
    BasisKind fit_basis = BasisKind::bspline;
    int fit_degree = 2;
    // Parallel replicate pipelines; 0 uses thread_count().
    unsigned workers = 0;
};

struct SegmentScore {
    ConfusionCounts counts;
    Rates rates;
};

struct ReplicateResult {
    std::uint64_t seed = 0;
    std::vector<SegmentScore> segments;
    std::vector<ChangepointSummary> changepoints;
    double seconds = 0.0;
};

struct MeanSd {
    double mean = 0.0;
    std::optional<double> sd;  // absent for a single replicate
};

inline MeanSd mean_sd(const std::vector<double>& x) {
    MeanSd out;
    for (double v : x) out.mean += v;
    out.mean /= static_cast<double>(x.size());
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
    }
    return out;
}

struct SegmentAggregate {
    MeanSd tpr, fpr, mcc;
};

struct Table1Report {
    std::vector<ReplicateResult> replicates;
    std::vector<SegmentAggregate> segments;
    std::vector<MeanSd> tau_mean;  // across replicates, per changepoint
    std::vector<MeanSd> tau_sd;
};

/// Seed of replicate r derived from the master seed.
inline std::uint64_t replicate_seed(std::uint64_t seed, int r) {
    std::uint64_t state = seed + 0x632BE59BD9B4E019ULL * static_cast<std::uint64_t>(r + 1);
    return splitmix64(state);
}

/// Fit one synthetic dataset and score the posterior median functional
/// graph of every segment against the truth.
inline ReplicateResult run_replicate(const Table1Options& opt, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    SimConfig sim = opt.sim;
    sim.seed = seed;
    const auto [data, truth] = generate_dataset(sim);
    const auto basis = make_basis(opt.fit_basis, data.time_grid(), opt.hp.K, opt.fit_degree);
    ChainConfig cfg = opt.chain;
    cfg.seed = seed;
    const auto samples = run_chain(data, basis, opt.hp, cfg);

    ReplicateResult res;
    res.seed = seed;
    for (int s = 0; s < opt.hp.S; ++s) {
        const auto est = estimate_graph(samples, s);
        const auto& tg = truth.func_graphs[static_cast<std::size_t>(std::min(s, sim.segments() - 1))];
        SegmentScore sc;
        sc.counts = confusion(est.func_graph, tg);
        sc.rates = rates(sc.counts);
        res.segments.push_back(sc);
    }
    if (opt.hp.S >= 2) res.changepoints = changepoint_posterior(samples);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// Repeats the simulate -> fit -> score pipeline and aggregates TPR, FPR and
/// MCC per segment plus the changepoint posterior summaries.
inline Table1Report reproduce_table1(const Table1Options& opt) {
    if (opt.replicates < 1) throw ValidationError("InvalidConfig", "replicates must be positive", {{"field", "replicates"}});
    Table1Report rep;
    rep.replicates.resize(static_cast<std::size_t>(opt.replicates));
    parallel_for(
        rep.replicates.size(),
        [&](std::size_t r) { rep.replicates[r] = run_replicate(opt, replicate_seed(opt.seed, static_cast<int>(r))); },
        opt.workers == 0 ? thread_count() : opt.workers);

    for (int s = 0; s < opt.hp.S; ++s) {
        std::vector<double> tpr, fpr, mcc;
        for (const auto& r : rep.replicates) {
            const auto& rt = r.segments[static_cast<std::size_t>(s)].rates;
            tpr.push_back(rt.tpr);
            fpr.push_back(rt.fpr);
            mcc.push_back(rt.mcc);
        }
        rep.segments.push_back({mean_sd(tpr), mean_sd(fpr), mean_sd(mcc)});
    }
    for (int m = 0; m + 1 < opt.hp.S; ++m) {
        std::vector<double> mean, sd;
        for (const auto& r : rep.replicates) {
            mean.push_back(r.changepoints[static_cast<std::size_t>(m)].mean);
            sd.push_back(r.changepoints[static_cast<std::size_t>(m)].sd);
        }
        rep.tau_mean.push_back(mean_sd(mean));
        rep.tau_sd.push_back(mean_sd(sd));
    }
    return rep;
}

}  // namespace dbfgm
