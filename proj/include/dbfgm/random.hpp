#pragma once

#include "dbfgm/core_types.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>

namespace dbfgm {

// Boost distributions are used instead of <random> ones so that draws are
// identical across standard library implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** engine. Cheap to construct, so independent substreams can be
/// derived per (iteration, segment, stage, replicate) key.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0x5eedULL) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Engine keyed by `seed` and an ordered list of integer keys. Distinct
    /// key lists give statistically independent streams.
    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
        std::uint64_t h = seed ^ 0x6a09e667f3bcc909ULL;
        std::uint64_t mix = splitmix64(h);
        for (auto k : keys) {
            std::uint64_t st = mix ^ (k + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2));
            mix = splitmix64(st);
        }
        return Rng(mix);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() { return boost::random::uniform_01<double>()(*this); }

    double normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(*this); }

    /// Gamma with the given shape and *rate*.
    double gamma(double shape, double rate) {
        return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(*this);
    }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    /// Inverse-Gamma with shape and rate (scale of the inverse).
    double inverse_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }

    bool bernoulli(double prob) { return uniform() < prob; }

    Vector standard_normal(Index dim) {
        Vector z(dim);
        for (Index i = 0; i < dim; ++i) z(i) = normal();
        return z;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
};

inline double log_normal_density(double x, double sd) {
    return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

/// Draws an index with probability proportional to exp(log_weights[k]),
/// stabilised by subtracting the maximum.
inline std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng) {
    if (log_weights.empty()) throw ValidationError("EmptySupport", "categorical draw over an empty set");
    double top = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) top = std::max(top, w);
    if (!std::isfinite(top)) throw NumericalError("DegenerateWeights", "all categorical weights are zero");
    double total = 0.0;
    for (double w : log_weights) total += std::exp(w - top);
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
        u -= std::exp(log_weights[k] - top);
        if (u < 0) return k;
    }
    return log_weights.size() - 1;
}

/// Draw from MVN(Q^{-1} l, Q^{-1}) given a Cholesky factorisation Q = L L'.
/// Never forms the inverse.
inline Vector sample_mvn_precision(const Eigen::LLT<Matrix>& chol, const Vector& l, Rng& rng) {
    Vector mean = chol.solve(l);
    Vector z = rng.standard_normal(l.size());
    chol.matrixU().solveInPlace(z);
    return mean + z;
}

/// Cholesky of a precision matrix with one retry after adding
/// 1e-10 * trace / dim to the diagonal. Throws FactorizationFailure.
inline Eigen::LLT<Matrix> factor_precision(Matrix Q, const char* what) {
    Eigen::LLT<Matrix> chol(Q);
    if (chol.info() == Eigen::Success) return chol;
    const double jitter = 1e-10 * Q.trace() / static_cast<double>(Q.rows());
    Q.diagonal().array() += std::abs(jitter);
    chol.compute(Q);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("FactorizationFailure", std::string("Cholesky factorization failed for ") + what);
    }
    return chol;
}

}  // namespace dbfgm
