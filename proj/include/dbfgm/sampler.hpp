#pragma once

#include "dbfgm/basis.hpp"
#include "dbfgm/core_types.hpp"
#include "dbfgm/diagnostics.hpp"
#include "dbfgm/parallel.hpp"
#include "dbfgm/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <vector>

namespace dbfgm {

struct ChainConfig {
    int total_iters = 5000;
    int burn_in = 3000;
    int thin = 1;
    std::uint64_t seed = 1;
    bool store_omega = false;
    bool prior_only = false;
    bool keep_records = true;
    bool random_scan = false;
    // Cholesky-check every precision matrix after each sweep.
    bool check_spd = false;
    // Hold coefficients, noise scales and changepoints at their initial values.
    bool freeze_coefficients = false;
    bool monitor_coefficients = true;
    double geweke_frac_a = 0.1;
    double geweke_frac_b = 0.5;
    int progress_every = 0;
};

inline void validate_chain_config(const ChainConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& reason) {
        throw ValidationError("InvalidConfig", "invalid " + field + ": " + reason, {{"field", field}, {"reason", reason}});
    };
    if (cfg.total_iters < 1) fail("total_iters", "must be positive");
    if (cfg.burn_in < 0 || cfg.burn_in >= cfg.total_iters) fail("burn_in", "need 0 <= burn_in < total_iters");
    if (cfg.thin < 1) fail("thin", "must be at least 1");
    if ((cfg.total_iters - cfg.burn_in) % cfg.thin != 0) fail("thin", "must divide total_iters - burn_in");
}

/// Optional starting values; anything left empty uses the default
/// initialisation (least-squares coefficients, equispaced changepoints).
struct ChainInit {
    std::optional<ChangepointVector> changepoints;
    std::vector<Matrix> coefficients;  // per segment, n x pK
    std::vector<double> sigma_eps;     // per segment
};

// ---------------------------------------------------------------------------
//  Sufficient statistics
// ---------------------------------------------------------------------------

/// Prefix sums over time of f f', F'y and y'y so that any segment's
/// quantities cost O(1) in T.
class SufficientStats {
public:
    SufficientStats(const FunctionalDataset& data, const BasisMatrix& basis)
        : data_(&data), basis_(&basis), n_(data.n()), p_(data.p()), K_(basis.K()), T_(data.T()) {
        if (basis.T() != T_) throw ValidationError("ShapeMismatch", "basis rows differ from the number of time points");
        const Index K = K_;
        ff_prefix_ = Matrix::Zero(T_ + 1, K * K);
        for (int t = 0; t < T_; ++t) {
            const Vector f = basis.values.row(t).transpose();
            Matrix outer = f * f.transpose();
            ff_prefix_.row(t + 1) = ff_prefix_.row(t) + Eigen::Map<const Eigen::RowVectorXd>(outer.data(), K * K);
        }
        const Index q = static_cast<Index>(p_) * K;
        fy_prefix_.assign(static_cast<std::size_t>(n_), RowMatrix::Zero(T_ + 1, q));
        yy_prefix_ = Matrix::Zero(n_, T_ + 1);
        for (int i = 0; i < n_; ++i) {
            auto& P = fy_prefix_[static_cast<std::size_t>(i)];
            for (int t = 0; t < T_; ++t) {
                P.row(t + 1) = P.row(t);
                double yy = 0.0;
                for (int j = 0; j < p_; ++j) {
                    const double y = data(i, j, t);
                    P.row(t + 1).segment(static_cast<Index>(j) * K, K) += y * basis.values.row(t);
                    yy += y * y;
                }
                yy_prefix_(i, t + 1) = yy_prefix_(i, t) + yy;
            }
        }
    }

    int n() const noexcept { return n_; }
    int p() const noexcept { return p_; }
    int K() const noexcept { return K_; }
    int T() const noexcept { return T_; }
    const FunctionalDataset& data() const noexcept { return *data_; }
    const BasisMatrix& basis() const noexcept { return *basis_; }

    /// sum_{t in [b, e)} f(t) f(t)' (K x K); the F'F block shared by every function.
    Matrix basis_gram(int b, int e) const {
        Eigen::RowVectorXd d = ff_prefix_.row(e) - ff_prefix_.row(b);
        return Eigen::Map<const Matrix>(d.data(), K_, K_);
    }

    /// sum_{t in [b, e)} F(t)' y_i(t) (length pK).
    Vector cross(int i, int b, int e) const {
        const auto& P = fy_prefix_[static_cast<std::size_t>(i)];
        return (P.row(e) - P.row(b)).transpose();
    }

    double yy(int i, int b, int e) const { return yy_prefix_(i, e) - yy_prefix_(i, b); }

    /// Residual sum of squares of Y against F c over time range [b, e).
    double rss(const Matrix& coeffs, int b, int e) const {
        if (e <= b) return 0.0;
        const Matrix G = basis_gram(b, e);
        double total = 0.0;
        for (int i = 0; i < n_; ++i) {
            double quad = 0.0;
            for (int j = 0; j < p_; ++j) {
                const Vector c = coeffs.row(i).segment(static_cast<Index>(j) * K_, K_).transpose();
                quad += c.dot(G * c);
            }
            total += yy(i, b, e) - 2.0 * coeffs.row(i).dot(cross(i, b, e).transpose()) + quad;
        }
        return std::max(total, 0.0);
    }

    /// Per-time residual sums r[t - b] = sum_{i,j} (y_ij(t) - f(t)' c_ij)^2 for t in [b, e).
    std::vector<double> pointwise_rss(const Matrix& coeffs, int b, int e) const {
        std::vector<double> out(static_cast<std::size_t>(std::max(0, e - b)), 0.0);
        if (e <= b) return out;
        const Matrix Bw = basis_->values.middleRows(b, e - b).transpose();  // K x W
        Matrix Ci(p_, K_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < p_; ++j) Ci.row(j) = coeffs.row(i).segment(static_cast<Index>(j) * K_, K_);
            const Matrix resid = data_->replicate(i).middleCols(b, e - b) - Ci * Bw;
            for (int t = 0; t < e - b; ++t) out[static_cast<std::size_t>(t)] += resid.col(t).squaredNorm();
        }
        return out;
    }

private:
    const FunctionalDataset* data_;
    const BasisMatrix* basis_;
    int n_, p_, K_, T_;
    Matrix ff_prefix_;
    std::vector<RowMatrix> fy_prefix_;
    Matrix yy_prefix_;
};

// ---------------------------------------------------------------------------
//  Random streams
// ---------------------------------------------------------------------------

enum class Stage : std::uint64_t { omega = 1, graph = 2, pi = 3, coefficients = 4, sigma = 5, changepoint = 6 };

/// Substream key (seed, iteration, segment). Draws never depend on thread
/// scheduling, only on these keys.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
    std::uint64_t segment = 0;

    Rng at(Stage stage, std::uint64_t index = 0) const {
        return Rng::substream(seed, {iteration, segment, static_cast<std::uint64_t>(stage), index});
    }
};

// ---------------------------------------------------------------------------
//  Conditional updates
// ---------------------------------------------------------------------------

/// Gamma shape of b for a segment with `replicates` coefficient vectors and
/// `length` time points.
inline double omega_gamma_shape(const Hyperparameters& hp, int replicates, int length) {
    return hp.omega_gamma_shape_convention == GammaShapeConvention::replicates ? replicates / 2.0 + 1.0
                                                                               : length / 2.0 + 1.0;
}

namespace detail {

// Copy of M with row and column `col` removed.
inline Matrix minor_without(const Matrix& M, Index col) {
    const Index q = M.rows();
    const Index a = col;
    const Index b = q - col - 1;
    Matrix out(q - 1, q - 1);
    out.topLeftCorner(a, a) = M.topLeftCorner(a, a);
    out.topRightCorner(a, b) = M.topRightCorner(a, b);
    out.bottomLeftCorner(b, a) = M.bottomLeftCorner(b, a);
    out.bottomRightCorner(b, b) = M.bottomRightCorner(b, b);
    return out;
}

// Inverse of minor_without: writes `sub` back into M around row/column `col`.
inline void set_minor(Matrix& M, Index col, const Matrix& sub) {
    const Index q = M.rows();
    const Index a = col;
    const Index b = q - col - 1;
    M.topLeftCorner(a, a) = sub.topLeftCorner(a, a);
    M.topRightCorner(a, b) = sub.topRightCorner(a, b);
    M.bottomLeftCorner(b, a) = sub.bottomLeftCorner(b, a);
    M.bottomRightCorner(b, b) = sub.bottomRightCorner(b, b);
}

// Column `col` of M without its diagonal entry.
inline Vector column_without(const Matrix& M, Index col) {
    const Index q = M.rows();
    Vector out(q - 1);
    out.head(col) = M.col(col).head(col);
    out.tail(q - col - 1) = M.col(col).tail(q - col - 1);
    return out;
}

inline void set_column(Matrix& M, Index col, const Vector& v) {
    const Index q = M.rows();
    M.col(col).head(col) = v.head(col);
    M.col(col).tail(q - col - 1) = v.tail(q - col - 1);
    M.row(col).head(col) = v.head(col).transpose();
    M.row(col).tail(q - col - 1) = v.tail(q - col - 1).transpose();
}

}  // namespace detail

/// Resample column/row `col` of omega from its full conditional. Uses and
/// maintains st.covariance == omega^{-1}; entries outside row/column `col`
/// of omega are untouched.
inline void update_omega_column(SegmentState& st, Index col, const Matrix& scatter, double shape,
                                const Hyperparameters& hp, Rng& rng) {
    const Index q = st.omega.rows();
    Matrix& W = st.covariance;
    const double sqq = scatter(col, col);
    const double rate = (sqq + hp.lambda) / 2.0;

    if (q == 1) {
        const double b = rng.gamma(shape, rate);
        st.omega(0, 0) = b;
        W(0, 0) = 1.0 / b;
        return;
    }

    const double v0sq = hp.v0 * hp.v0;
    const double v1sq = hp.v1() * hp.v1();
    const Vector w12 = detail::column_without(W, col);
    const Vector s12 = detail::column_without(scatter, col);
    Vector spike(q - 1);
    for (Index r = 0; r < q - 1; ++r) spike(r) = 1.0 / (st.graph(r < col ? r : r + 1, col) ? v1sq : v0sq);

    // Inverse of Omega_11 from the partitioned inverse of omega.
    Matrix C = detail::minor_without(W, col);
    C.noalias() -= (w12 / W(col, col)) * w12.transpose();

    Matrix Q = (sqq + hp.lambda) * C;
    Q.diagonal() += spike;
    const auto chol = factor_precision(std::move(Q), "the omega column update");
    const Vector a = sample_mvn_precision(chol, -s12, rng);
    const double b = rng.gamma(shape, rate);
    const Vector Ca = C * a;

    detail::set_column(st.omega, col, a);
    st.omega(col, col) = b + a.dot(Ca);

    C.noalias() += (Ca / b) * Ca.transpose();
    detail::set_minor(W, col, C);
    detail::set_column(W, col, -Ca / b);
    W(col, col) = 1.0 / b;
}

/// Recompute st.covariance from st.omega (drops accumulated rank-one drift).
inline void refresh_covariance(SegmentState& st) {
    Eigen::LLT<Matrix> chol(st.omega);
    if (chol.info() != Eigen::Success) throw NumericalError("FactorizationFailure", "omega lost positive definiteness");
    Matrix W = chol.solve(Matrix::Identity(st.omega.rows(), st.omega.cols()));
    st.covariance = 0.5 * (W + W.transpose());
}

/// Step (a): one sweep over all columns of omega.
inline void update_omega(SegmentState& st, const Matrix& scatter, double shape, const Hyperparameters& hp, Rng& rng,
                         bool random_scan = false) {
    refresh_covariance(st);
    const Index q = st.omega.rows();
    std::vector<Index> order(static_cast<std::size_t>(q));
    for (Index c = 0; c < q; ++c) order[static_cast<std::size_t>(c)] = c;
    if (random_scan) {
        for (std::size_t k = order.size(); k > 1; --k) {
            const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
            std::swap(order[k - 1], order[std::min(j, k - 1)]);
        }
    }
    for (Index c : order) update_omega_column(st, c, scatter, shape, hp, rng);
}

/// Conditional inclusion probability of one edge given its precision entry
/// and prior probability; computed on the log-odds scale.
inline double edge_inclusion_probability(double omega, double prob, const Hyperparameters& hp) {
    const double v0 = hp.v0;
    const double v1 = hp.v1();
    const double log_ratio = std::log(v0 / v1) - 0.5 * omega * omega * (1.0 / (v1 * v1) - 1.0 / (v0 * v0));
    const double logit = log_ratio + std::log(prob) - std::log1p(-prob);
    if (logit == std::numeric_limits<double>::infinity()) return 1.0;
    if (logit == -std::numeric_limits<double>::infinity()) return 0.0;
    return 1.0 / (1.0 + std::exp(-logit));
}

/// Step (b): independent Bernoulli draws for every off-diagonal indicator.
inline void update_graph(SegmentState& st, int K, const Hyperparameters& hp, Rng& rng) {
    const Index q = st.omega.rows();
    for (Index a = 0; a < q; ++a) {
        const Index ja = a / K;
        for (Index b = a + 1; b < q; ++b) {
            const Index jb = b / K;
            const double prob = ja == jb ? st.pi0 : st.block_probs(ja, jb);
            const std::uint8_t g = rng.uniform() < edge_inclusion_probability(st.omega(a, b), prob, hp) ? 1 : 0;
            st.graph(a, b) = g;
            st.graph(b, a) = g;
        }
    }
}

/// Step (c): conjugate Beta updates of the block probabilities and pi0.
inline void update_pi(SegmentState& st, int K, const Hyperparameters& hp, Rng& rng) {
    const Index p = st.block_probs.rows();
    for (Index ja = 0; ja < p; ++ja) {
        for (Index jb = ja + 1; jb < p; ++jb) {
            const double e = st.graph.block(ja * K, jb * K, K, K).cast<double>().sum();
            const double pi = rng.beta(hp.alpha + e, hp.beta + static_cast<double>(K) * K - e);
            st.block_probs(ja, jb) = st.block_probs(jb, ja) = pi;
        }
    }
    if (hp.pi0_fixed) {
        st.pi0 = *hp.pi0_fixed;
        return;
    }
    double e0 = 0.0;
    for (Index j = 0; j < p; ++j) {
        for (Index k1 = 0; k1 < K; ++k1) {
            for (Index k2 = k1 + 1; k2 < K; ++k2) e0 += st.graph(j * K + k1, j * K + k2);
        }
    }
    const double pairs = static_cast<double>(p) * K * (K - 1) / 2.0;
    st.pi0 = rng.beta(hp.alpha0 + e0, hp.beta0 + pairs - e0);
}

/// Step (d1): draw every replicate's coefficients for the segment covering
/// time range [b, e). With no data (stats == nullptr) or an empty range the
/// draw is from the prior MVN(0, omega^{-1}).
inline void update_coefficients(SegmentState& st, const SufficientStats* stats, int b, int e, const StreamKey& key) {
    const Index q = st.omega.rows();
    Matrix Q = st.omega;
    const bool has_data = stats != nullptr && e > b;
    const double inv_var = 1.0 / (st.sigma_eps * st.sigma_eps);
    if (has_data) {
        const Matrix G = stats->basis_gram(b, e);
        const Index K = G.rows();
        for (Index j = 0; j < q / K; ++j) Q.block(j * K, j * K, K, K) += inv_var * G;
    }
    const auto chol = factor_precision(std::move(Q), "the coefficient update");
    for (Index i = 0; i < st.coeffs.rows(); ++i) {
        Rng rng = key.at(Stage::coefficients, static_cast<std::uint64_t>(i));
        const Vector l = has_data ? Vector(inv_var * stats->cross(static_cast<int>(i), b, e)) : Vector::Zero(q);
        st.coeffs.row(i) = sample_mvn_precision(chol, l, rng).transpose();
    }
}

/// Step (d2): inverse-Gamma draw of the segment's noise variance.
inline void update_sigma(SegmentState& st, const SufficientStats* stats, int b, int e, const Hyperparameters& hp,
                         Rng& rng) {
    double shape = hp.alpha_sigma;
    double rate = hp.beta_sigma;
    if (stats != nullptr && e > b) {
        shape += 0.5 * (e - b) * stats->n() * stats->p();
        rate += 0.5 * stats->rss(st.coeffs, b, e);
    }
    st.sigma_eps = std::sqrt(rng.inverse_gamma(shape, rate));
}

/// Candidate set and unnormalised log-weights of changepoint m (0-based).
/// log_weights[k] belongs to tau = first_tau + k and is measured relative to
/// the first candidate.
struct ChangepointWeights {
    int first_tau = 0;
    std::vector<double> log_weights;
};

inline ChangepointWeights changepoint_log_weights(int m, const std::vector<SegmentState>& segments,
                                                  const ChangepointVector& cps, const SufficientStats* stats,
                                                  const Hyperparameters& hp, int T) {
    const int lo = cps.range(m, T).first;        // first index of segment m
    const int hi = cps.range(m + 1, T).second;   // one past the last index of segment m + 1
    const auto bounds = hp.tau_bounds(m, T);
    const int first = std::max(lo + 2, bounds.min);
    const int last = std::min({hi, bounds.max, T - 1});
    if (first > last) {
        throw ValidationError("EmptySupport", "no admissible value for changepoint " + std::to_string(m + 1),
                              {{"changepoint", std::to_string(m + 1)}});
    }
    ChangepointWeights out{first, std::vector<double>(static_cast<std::size_t>(last - first + 1), 0.0)};
    if (stats == nullptr) return out;

    // w(tau) / w(tau - 1) is the likelihood ratio of time index tau - 2
    // (0-based) under segment m versus segment m + 1.
    const auto& before = segments[static_cast<std::size_t>(m)];
    const auto& after = segments[static_cast<std::size_t>(m + 1)];
    const int tb = first - 1;  // 0-based index of the first candidate's start
    const int te = last - 1;
    const auto r_before = stats->pointwise_rss(before.coeffs, tb, te);
    const auto r_after = stats->pointwise_rss(after.coeffs, tb, te);
    const double np = static_cast<double>(stats->n()) * stats->p();
    auto loglik = [np](double rss, double sigma) {
        return -0.5 * np * std::log(2.0 * std::numbers::pi * sigma * sigma) - rss / (2.0 * sigma * sigma);
    };
    double acc = 0.0;
    for (std::size_t k = 1; k < out.log_weights.size(); ++k) {
        acc += loglik(r_before[k - 1], before.sigma_eps) - loglik(r_after[k - 1], after.sigma_eps);
        out.log_weights[k] = acc;
    }
    return out;
}

/// Step (e): draw changepoint m from its discrete full conditional.
inline int update_changepoint(int m, const std::vector<SegmentState>& segments, ChangepointVector& cps,
                              const SufficientStats* stats, const Hyperparameters& hp, int T, Rng& rng) {
    const auto w = changepoint_log_weights(m, segments, cps, stats, hp, T);
    const auto k = sample_log_categorical(w.log_weights, rng);
    cps.taus[static_cast<std::size_t>(m)] = w.first_tau + static_cast<int>(k);
    return cps.taus[static_cast<std::size_t>(m)];
}

/// -2 log-likelihood of the data at the given coefficients, noise scales and changepoints.
inline double model_deviance(const SufficientStats& stats, const std::vector<Matrix>& coeffs,
                             const std::vector<double>& sigma, const ChangepointVector& cps) {
    double dev = 0.0;
    const double np = static_cast<double>(stats.n()) * stats.p();
    for (int s = 0; s < cps.segments(); ++s) {
        const auto [b, e] = cps.range(s, stats.T());
        if (e <= b) continue;
        const double var = sigma[static_cast<std::size_t>(s)] * sigma[static_cast<std::size_t>(s)];
        dev += np * (e - b) * std::log(2.0 * std::numbers::pi * var) +
               stats.rss(coeffs[static_cast<std::size_t>(s)], b, e) / var;
    }
    return dev;
}

// ---------------------------------------------------------------------------
//  The chain
// ---------------------------------------------------------------------------

/// One Markov chain: owns all mutable state of the sampler.
class GibbsSampler {
public:
    /// Posterior chain on data.
    GibbsSampler(const FunctionalDataset& data, const BasisMatrix& basis, Hyperparameters hp, ChainConfig cfg,
                 ChainInit init = {})
        : hp_(std::move(hp)), cfg_(std::move(cfg)), p_(data.p()), n_(data.n()), T_(data.T()) {
        validate_dataset(data);
        if (basis.K() != hp_.K) throw ValidationError("ShapeMismatch", "basis size differs from K");
        stats_.emplace(data, basis);
        initialise(std::move(init));
    }

    /// Prior-only chain (no likelihood terms), or a chain with coefficients
    /// frozen at `init.coefficients` when cfg.freeze_coefficients is set.
    GibbsSampler(int p, int T, Hyperparameters hp, ChainConfig cfg, ChainInit init = {})
        : hp_(std::move(hp)), cfg_(std::move(cfg)), p_(p), n_(0), T_(T) {
        if (!cfg_.prior_only && !cfg_.freeze_coefficients) {
            throw ValidationError("InvalidConfig", "a chain without data must be prior-only or have frozen coefficients");
        }
        if (cfg_.freeze_coefficients && !init.coefficients.empty()) n_ = static_cast<int>(init.coefficients.front().rows());
        initialise(std::move(init));
    }

    const Hyperparameters& hyper() const noexcept { return hp_; }
    const ChainConfig& config() const noexcept { return cfg_; }
    const std::vector<SegmentState>& segments() const noexcept { return segments_; }
    const ChangepointVector& changepoints() const noexcept { return cps_; }
    int p() const noexcept { return p_; }
    int n() const noexcept { return n_; }
    int T() const noexcept { return T_; }
    bool has_data() const noexcept { return stats_.has_value() && !cfg_.prior_only; }
    const SufficientStats* stats() const noexcept { return has_data() ? &*stats_ : nullptr; }

    /// One full Gibbs iteration (1-based `iteration` keys the random streams).
    void sweep(int iteration) {
        try {
            const int S = static_cast<int>(segments_.size());
            parallel_for(static_cast<std::size_t>(S), [&](std::size_t s) { update_segment(iteration, static_cast<int>(s)); },
                         threads_);
            if (!cfg_.freeze_coefficients) {
                for (int m = 0; m + 1 < S; ++m) {
                    Rng rng = key(iteration, m).at(Stage::changepoint);
                    update_changepoint(m, segments_, cps_, stats(), hp_, T_, rng);
                }
            }
            if (cfg_.check_spd) {
                for (const auto& st : segments_) {
                    if (Eigen::LLT<Matrix>(st.omega).info() != Eigen::Success) {
                        throw NumericalError("FactorizationFailure", "stored omega failed Cholesky");
                    }
                }
            }
        } catch (const NumericalError& e) {
            throw NumericalError(e.code(), "iteration " + std::to_string(iteration) + ": " + e.what(),
                                 with_iteration(e.fields(), iteration));
        } catch (const ValidationError& e) {
            throw ValidationError(e.code(), "iteration " + std::to_string(iteration) + ": " + e.what(),
                                  with_iteration(e.fields(), iteration));
        }
    }

    double deviance() const {
        if (!has_data()) return 0.0;
        std::vector<Matrix> coeffs;
        std::vector<double> sigma;
        for (const auto& st : segments_) {
            coeffs.push_back(st.coeffs);
            sigma.push_back(st.sigma_eps);
        }
        return model_deviance(*stats_, coeffs, sigma, cps_);
    }

    IterationRecord record(int iteration) const {
        IterationRecord rec;
        rec.iteration = iteration;
        rec.changepoints = cps_;
        rec.deviance = deviance();
        for (const auto& st : segments_) {
            SegmentDraw d;
            d.graph = PackedGraph::pack(st.graph);
            d.block_probs.reserve(static_cast<std::size_t>(pair_count(p_)));
            for (int a = 0; a < p_; ++a) {
                for (int b = a + 1; b < p_; ++b) d.block_probs.push_back(st.block_probs(a, b));
            }
            d.pi0 = st.pi0;
            d.sigma_eps = st.sigma_eps;
            if (cfg_.store_omega) d.omega = st.omega;
            rec.segments.push_back(std::move(d));
        }
        return rec;
    }

private:
    static Error::Fields with_iteration(Error::Fields f, int iteration) {
        f.emplace_back("iteration", std::to_string(iteration));
        return f;
    }

    StreamKey key(int iteration, int segment) const {
        return {cfg_.seed, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(segment)};
    }

    void update_segment(int iteration, int s) {
        auto& st = segments_[static_cast<std::size_t>(s)];
        const auto k = key(iteration, s);
        const auto [b, e] = cps_.range(s, T_);
        const bool use_coeffs = (has_data() || cfg_.freeze_coefficients) && !cfg_.prior_only && (e > b || !has_data());

        Matrix scatter;
        double shape = 1.0;
        if (use_coeffs && st.coeffs.rows() > 0) {
            scatter = st.coeffs.transpose() * st.coeffs;
            shape = omega_gamma_shape(hp_, static_cast<int>(st.coeffs.rows()), e - b);
        } else {
            scatter = Matrix::Zero(st.omega.rows(), st.omega.cols());
        }
        Rng r_omega = k.at(Stage::omega);
        update_omega(st, scatter, shape, hp_, r_omega, cfg_.random_scan);
        Rng r_graph = k.at(Stage::graph);
        update_graph(st, hp_.K, hp_, r_graph);
        Rng r_pi = k.at(Stage::pi);
        update_pi(st, hp_.K, hp_, r_pi);

        if (has_data() && !cfg_.freeze_coefficients) {
            update_coefficients(st, stats(), b, e, k);
            Rng r_sigma = k.at(Stage::sigma);
            update_sigma(st, stats(), b, e, hp_, r_sigma);
        }
    }

    void initialise(ChainInit init) {
        validate_hyperparameters(hp_, T_);
        validate_chain_config(cfg_);
        threads_ = thread_count();
        const int S = hp_.S;
        const double pi0 = hp_.pi0_fixed.value_or(0.5);
        segments_.assign(static_cast<std::size_t>(S), SegmentState::initial(p_, hp_.K, n_, pi0));

        if (init.changepoints) {
            cps_ = *init.changepoints;
        } else {
            cps_.taus.clear();
            int prev = 1;
            for (int m = 0; m + 1 < S; ++m) {
                const auto bnd = hp_.tau_bounds(m, T_);
                int tau = 0;
                if (hp_.tau_intervals.empty()) {
                    tau = static_cast<int>(std::lround(bnd.min + (m + 1.0) * (bnd.max - bnd.min) / S));
                } else {
                    tau = (bnd.min + bnd.max) / 2;
                }
                tau = std::clamp(tau, std::max(bnd.min, prev + 1), bnd.max);
                cps_.taus.push_back(tau);
                prev = tau;
            }
        }
        if (static_cast<int>(cps_.taus.size()) != S - 1) {
            throw ValidationError("InvalidChangepoints", "initial changepoints must have S-1 entries");
        }
        validate_changepoints(cps_, T_);

        const Index q = static_cast<Index>(p_) * hp_.K;
        if (!init.coefficients.empty()) {
            if (static_cast<int>(init.coefficients.size()) != S) {
                throw ValidationError("ShapeMismatch", "initial coefficients need one matrix per segment");
            }
            for (int s = 0; s < S; ++s) {
                const auto& C = init.coefficients[static_cast<std::size_t>(s)];
                if (C.rows() != n_ || C.cols() != q) throw ValidationError("ShapeMismatch", "initial coefficients must be n x pK");
                segments_[static_cast<std::size_t>(s)].coeffs = C;
            }
        } else if (has_data()) {
            least_squares_start();
        }
        if (!init.sigma_eps.empty()) {
            if (static_cast<int>(init.sigma_eps.size()) != S) throw ValidationError("ShapeMismatch", "need one sigma per segment");
            for (int s = 0; s < S; ++s) segments_[static_cast<std::size_t>(s)].sigma_eps = init.sigma_eps[static_cast<std::size_t>(s)];
        } else if (has_data()) {
            double rss = 0.0;
            double yy = 0.0;
            for (int s = 0; s < S; ++s) {
                const auto [b, e] = cps_.range(s, T_);
                rss += stats_->rss(segments_[static_cast<std::size_t>(s)].coeffs, b, e);
            }
            for (int i = 0; i < n_; ++i) yy += stats_->yy(i, 0, T_);
            const double count = static_cast<double>(n_) * p_ * T_;
            const double sd = std::sqrt(rss / count);
            const double floor = 1e-6 * (1.0 + std::sqrt(yy / count));
            for (auto& st : segments_) st.sigma_eps = std::max(sd, floor);
        }
    }

    // Minimum-norm least-squares coefficients per replicate and segment.
    void least_squares_start() {
        const int K = hp_.K;
        for (int s = 0; s < hp_.S; ++s) {
            auto& st = segments_[static_cast<std::size_t>(s)];
            const auto [b, e] = cps_.range(s, T_);
            if (e <= b) continue;
            const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(stats_->basis_gram(b, e));
            for (int i = 0; i < n_; ++i) {
                const Vector fy = stats_->cross(i, b, e);
                for (int j = 0; j < p_; ++j) {
                    st.coeffs.row(i).segment(static_cast<Index>(j) * K, K) =
                        cod.solve(fy.segment(static_cast<Index>(j) * K, K)).transpose();
                }
            }
        }
    }

    Hyperparameters hp_;
    ChainConfig cfg_;
    int p_;
    int n_;
    int T_;
    unsigned threads_ = 1;
    std::optional<SufficientStats> stats_;
    std::vector<SegmentState> segments_;
    ChangepointVector cps_;
};

/// Called once per stored iteration with the record and the live sampler.
using RecordObserver = std::function<void(const IterationRecord&, const GibbsSampler&)>;

namespace detail {

inline PosteriorSamples drive_chain(GibbsSampler& chain, const RecordObserver& observer) {
    const auto& cfg = chain.config();
    const auto& hp = chain.hyper();
    PosteriorSamples out;
    out.n = chain.n();
    out.p = chain.p();
    out.K = hp.K;
    out.T = chain.T();
    out.S = hp.S;
    out.total_iters = cfg.total_iters;
    out.burn_in = cfg.burn_in;
    out.thin = cfg.thin;
    out.rng_seed = cfg.seed;

    const int stored = out.expected_records();
    const bool track_coeffs = chain.has_data() && !cfg.freeze_coefficients;
    const Index q = static_cast<Index>(chain.p()) * hp.K;
    std::vector<GewekeAccumulator> geweke;
    if (track_coeffs) {
        out.coef_mean.assign(static_cast<std::size_t>(hp.S), Matrix::Zero(chain.n(), q));
        if (cfg.monitor_coefficients && stored >= 50) {
            for (int s = 0; s < hp.S; ++s) {
                geweke.emplace_back(stored, static_cast<Index>(chain.n()) * q, cfg.geweke_frac_a, cfg.geweke_frac_b);
            }
        }
    }
    if (cfg.keep_records) out.records.reserve(static_cast<std::size_t>(stored));

    const auto start = std::chrono::steady_clock::now();
    for (int it = 1; it <= cfg.total_iters; ++it) {
        chain.sweep(it);
        if (cfg.progress_every > 0 && it % cfg.progress_every == 0) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::clog << "[dbfgm] iteration " << it << "/" << cfg.total_iters << " (" << secs << " s)\n";
        }
        if (it <= cfg.burn_in || (it - cfg.burn_in) % cfg.thin != 0) continue;
        if (track_coeffs) {
            for (int s = 0; s < hp.S; ++s) {
                const auto& C = chain.segments()[static_cast<std::size_t>(s)].coeffs;
                out.coef_mean[static_cast<std::size_t>(s)] += C;
                if (!geweke.empty()) {
                    geweke[static_cast<std::size_t>(s)].push(Eigen::Map<const Vector>(C.data(), C.size()));
                }
            }
        }
        if (cfg.keep_records || observer) {
            auto rec = chain.record(it);
            if (observer) observer(rec, chain);
            if (cfg.keep_records) out.records.push_back(std::move(rec));
        }
    }
    if (track_coeffs) {
        for (auto& M : out.coef_mean) M /= static_cast<double>(stored);
        for (std::size_t s = 0; s < geweke.size(); ++s) {
            const auto res = geweke[s].results();
            Matrix Z(chain.n(), q);
            for (Index k = 0; k < Z.size(); ++k) Z.data()[k] = res[static_cast<std::size_t>(k)].z;
            out.coef_geweke_z.push_back(std::move(Z));
        }
    }
    return out;
}

}  // namespace detail

/// Runs a posterior chain on data: per iteration and segment, omega ->
/// graph -> block probabilities -> coefficients -> noise, then every
/// changepoint. Deterministic given (seed, configuration).
inline PosteriorSamples run_chain(const FunctionalDataset& data, const BasisMatrix& basis, const Hyperparameters& hp,
                                  const ChainConfig& cfg, ChainInit init = {}, const RecordObserver& observer = {}) {
    GibbsSampler chain(data, basis, hp, cfg, std::move(init));
    return detail::drive_chain(chain, observer);
}

/// Chain without data: prior-only (cfg.prior_only) or with frozen
/// coefficients supplied through `init` (cfg.freeze_coefficients).
inline PosteriorSamples run_chain(int p, int T, const Hyperparameters& hp, const ChainConfig& cfg, ChainInit init = {},
                                  const RecordObserver& observer = {}) {
    GibbsSampler chain(p, T, hp, cfg, std::move(init));
    return detail::drive_chain(chain, observer);
}

}  // namespace dbfgm
