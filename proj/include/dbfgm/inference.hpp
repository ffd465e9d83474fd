#pragma once

#include "dbfgm/core_types.hpp"
#include "dbfgm/diagnostics.hpp"
#include "dbfgm/sampler.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace dbfgm {

namespace detail {
inline void require_samples(const PosteriorSamples& samples, int s) {
    if (samples.records.empty()) throw ValidationError("NoSamples", "posterior sample store is empty");
    if (s < 0 || s >= samples.S) throw ValidationError("OutOfRange", "segment index out of range", {{"s", std::to_string(s + 1)}});
}
}  // namespace detail

/// Marginal posterior inclusion probabilities of the coefficient graph of
/// segment s (0-based).
inline Matrix edge_probabilities(const PosteriorSamples& samples, int s) {
    detail::require_samples(samples, s);
    const Index q = static_cast<Index>(samples.p) * samples.K;
    std::vector<double> counts(static_cast<std::size_t>(pair_count(q)), 0.0);
    for (const auto& rec : samples.records) {
        const auto& bits = rec.segments[static_cast<std::size_t>(s)].graph.bits;
        for (std::size_t k = 0; k < bits.size(); ++k) counts[k] += bits[k];
    }
    Matrix P = Matrix::Zero(q, q);
    const double N = static_cast<double>(samples.records.size());
    std::size_t k = 0;
    for (Index a = 0; a < q; ++a) {
        for (Index b = a + 1; b < q; ++b, ++k) P(a, b) = P(b, a) = counts[k] / N;
    }
    return P;
}

/// Binary graph with an edge wherever probs > threshold (strict).
inline Graph median_graph(const Matrix& probs, double threshold = 0.5) {
    Graph g = (probs.array() > threshold).cast<std::uint8_t>();
    g.diagonal().setZero();
    return g;
}

inline GraphEstimate estimate_graph(const PosteriorSamples& samples, int s, double threshold = 0.5) {
    GraphEstimate est;
    est.coef_probs = edge_probabilities(samples, s);
    est.coef_graph = median_graph(est.coef_probs, threshold);
    est.func_graph = functional_graph(est.coef_graph, samples.p, samples.K);
    est.threshold = threshold;
    return est;
}

/// Alternative summary: fraction of draws whose functional graph holds each edge.
inline Matrix functional_edge_probabilities(const PosteriorSamples& samples, int s) {
    detail::require_samples(samples, s);
    const int p = samples.p;
    const int K = samples.K;
    Matrix P = Matrix::Zero(p, p);
    for (const auto& rec : samples.records) {
        const auto f = functional_graph(rec.segments[static_cast<std::size_t>(s)].graph.unpack(), p, K);
        P += f.cast<double>();
    }
    return P / static_cast<double>(samples.records.size());
}

// ---------------------------------------------------------------------------
//  Changepoints
// ---------------------------------------------------------------------------

struct ChangepointSummary {
    std::map<int, double> pmf;
    double mean = 0.0;
    double sd = 0.0;
    int mode = 0;
};

/// Empirical pmf, mean and sd of a set of integer draws.
inline ChangepointSummary summarize_draws(const std::vector<int>& draws) {
    if (draws.empty()) throw ValidationError("NoSamples", "no changepoint draws");
    ChangepointSummary out;
    const double N = static_cast<double>(draws.size());
    for (int d : draws) out.pmf[d] += 1.0 / N;
    double sum = 0.0;
    for (int d : draws) sum += d;
    out.mean = sum / N;
    double ss = 0.0;
    for (int d : draws) ss += (d - out.mean) * (d - out.mean);
    out.sd = std::sqrt(ss / N);
    double best = -1.0;
    for (const auto& [tau, prob] : out.pmf) {
        if (prob > best) {
            best = prob;
            out.mode = tau;
        }
    }
    return out;
}

/// One summary per changepoint.
inline std::vector<ChangepointSummary> changepoint_posterior(const PosteriorSamples& samples) {
    if (samples.S < 2) throw ValidationError("InvalidConfig", "changepoint posterior needs S >= 2");
    if (samples.records.empty()) throw ValidationError("NoSamples", "posterior sample store is empty");
    std::vector<ChangepointSummary> out;
    for (int m = 0; m + 1 < samples.S; ++m) {
        std::vector<int> draws;
        draws.reserve(samples.records.size());
        for (const auto& rec : samples.records) draws.push_back(rec.changepoints.taus[static_cast<std::size_t>(m)]);
        out.push_back(summarize_draws(draws));
    }
    return out;
}

// ---------------------------------------------------------------------------
//  DIC
// ---------------------------------------------------------------------------

struct DicReport {
    double dic = 0.0;
    double mean_deviance = 0.0;
    double deviance_at_estimate = 0.0;
    double p_d = 0.0;
};

/// Joint posterior mode of the changepoint vector.
inline ChangepointVector changepoint_mode(const PosteriorSamples& samples) {
    std::map<std::vector<int>, int> counts;
    for (const auto& rec : samples.records) ++counts[rec.changepoints.taus];
    const std::vector<int>* best = nullptr;
    int top = -1;
    for (const auto& [taus, c] : counts) {
        if (c > top) {
            top = c;
            best = &taus;
        }
    }
    return ChangepointVector{*best};
}

/// DIC with plug-in at the posterior-mean coefficients and noise scales and
/// the posterior mode of the changepoints. Needs samples produced with
/// coefficient means (a data chain).
inline DicReport dic(const PosteriorSamples& samples, const FunctionalDataset& data, const BasisMatrix& basis) {
    if (samples.records.empty()) throw ValidationError("InsufficientSamples", "DIC needs at least one stored iteration");
    if (static_cast<int>(samples.coef_mean.size()) != samples.S) {
        throw ValidationError("InsufficientSamples", "DIC needs posterior coefficient means");
    }
    const SufficientStats stats(data, basis);
    DicReport r;
    for (const auto& rec : samples.records) r.mean_deviance += rec.deviance;
    r.mean_deviance /= static_cast<double>(samples.records.size());

    std::vector<double> sigma(static_cast<std::size_t>(samples.S), 0.0);
    for (const auto& rec : samples.records) {
        for (int s = 0; s < samples.S; ++s) sigma[static_cast<std::size_t>(s)] += rec.segments[static_cast<std::size_t>(s)].sigma_eps;
    }
    for (auto& v : sigma) v /= static_cast<double>(samples.records.size());
    r.deviance_at_estimate = model_deviance(stats, samples.coef_mean, sigma, changepoint_mode(samples));
    r.p_d = r.mean_deviance - r.deviance_at_estimate;
    r.dic = r.deviance_at_estimate + 2.0 * r.p_d;
    return r;
}

// ---------------------------------------------------------------------------
//  Geweke
// ---------------------------------------------------------------------------

struct GewekeEntry {
    std::string name;
    GewekeResult result;
};

struct GewekeReport {
    double frac_a = 0.1;
    double frac_b = 0.5;
    double alpha = 0.01;
    std::vector<GewekeEntry> scalars;       // sigma and tau traces
    std::vector<Matrix> coefficient_z;      // per segment, n x pK
    int coefficient_rejections = 0;
    long coefficient_count = 0;

    int rejections() const {
        int r = coefficient_rejections;
        for (const auto& e : scalars) r += e.result.reject ? 1 : 0;
        return r;
    }
};

/// Geweke z-scores for every noise scale and changepoint trace plus the
/// streamed coefficient z-scores held in `samples`.
inline GewekeReport geweke(const PosteriorSamples& samples, double frac_a = 0.1, double frac_b = 0.5,
                           double alpha = 0.01) {
    GewekeReport rep{frac_a, frac_b, alpha, {}, samples.coef_geweke_z, 0, 0};
    const auto N = samples.records.size();
    std::vector<double> trace(N);
    for (int s = 0; s < samples.S; ++s) {
        for (std::size_t k = 0; k < N; ++k) trace[k] = samples.records[k].segments[static_cast<std::size_t>(s)].sigma_eps;
        rep.scalars.push_back({"sigma_s" + std::to_string(s + 1), geweke(trace, frac_a, frac_b, alpha)});
    }
    for (int m = 0; m + 1 < samples.S; ++m) {
        for (std::size_t k = 0; k < N; ++k) trace[k] = samples.records[k].changepoints.taus[static_cast<std::size_t>(m)];
        rep.scalars.push_back({"tau_" + std::to_string(m + 1), geweke(trace, frac_a, frac_b, alpha)});
    }
    const double crit = normal_two_sided_critical(alpha);
    for (const auto& Z : rep.coefficient_z) {
        rep.coefficient_count += Z.size();
        rep.coefficient_rejections += static_cast<int>((Z.array().abs() > crit).count());
    }
    return rep;
}

}  // namespace dbfgm
