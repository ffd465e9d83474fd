#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace oracle {

// Posterior of the two-node continuous spike-and-slab model with fixed data
// scatter S (from n replicates), slab/spike sds v1/v0, exponential rate lambda
// on the diagonal and Beta(alpha, beta) edge probability integrated out:
//   p(W, g) ∝ det(W)^{n/2} exp(-tr(S W)/2) N(w12 | 0, v_g^2)
//             exp(-lambda (w11 + w22)/2) E[pi^g (1-pi)^{1-g}]
// over positive-definite W. Evaluated by nested adaptive Gauss-Kronrod.
struct Ggm2x2 {
    double s11, s12, s22;
    int n;
    double v0, v1, lambda, alpha, beta;

    // log of the diagonal range end points (in log w) for the outer integrals.
    double log_lo = std::log(1e-6);
    double log_hi = std::log(200.0);

    double prior_weight(int g) const { return g == 1 ? alpha / (alpha + beta) : beta / (alpha + beta); }

    // Unnormalised density of (w11, w12, w22, g); zero outside the PD cone.
    double density(double w11, double w12, double w22, int g) const {
        const double det = w11 * w22 - w12 * w12;
        if (det <= 0) return 0.0;
        const double v = g == 1 ? v1 : v0;
        const double log_lik = 0.5 * n * std::log(det) - 0.5 * (s11 * w11 + 2.0 * s12 * w12 + s22 * w22);
        const double log_prior = -0.5 * w12 * w12 / (v * v) - std::log(v) - 0.5 * lambda * (w11 + w22);
        return std::exp(log_lik + log_prior + log_shift) * prior_weight(g);
    }

    // Mass of (g, w12 <= upper), integrating out the diagonal.
    double mass(int g, double upper) const {
        using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
        auto over_w22 = [&](double w11) {
            return GK::integrate(
                [&](double lw22) {
                    const double w22 = std::exp(lw22);
                    const double bound = std::sqrt(w11 * w22);
                    const double v = g == 1 ? v1 : v0;
                    const double lo = std::max(-bound, -12.0 * v);
                    const double hi = std::min({bound, 12.0 * v, upper});
                    if (hi <= lo) return 0.0;
                    const double inner = GK::integrate([&](double w12) { return density(w11, w12, w22, g); }, lo, hi, 8, 1e-11);
                    return inner * w22;
                },
                log_lo, log_hi, 8, 1e-10);
        };
        return GK::integrate([&](double lw11) { return over_w22(std::exp(lw11)) * std::exp(lw11); }, log_lo, log_hi, 8, 1e-10);
    }

    double prob_edge() const {
        const double m1 = mass(1, INFINITY);
        const double m0 = mass(0, INFINITY);
        return m1 / (m0 + m1);
    }

    // P(w12 <= x) under the posterior.
    double cdf_w12(double x) const {
        const double total = mass(0, INFINITY) + mass(1, INFINITY);
        return (mass(0, x) + mass(1, x)) / total;
    }

    // Scales the integrand away from under/overflow; cancels in ratios.
    double log_shift = 0.0;
};

}  // namespace oracle
