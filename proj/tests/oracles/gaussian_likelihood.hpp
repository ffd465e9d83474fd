#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_logpdf(double y, double mean, double sd) {
    const double z = (y - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Single replicate, single function: y[t] with piecewise means
// mean_before[t] for t < tau and mean_after[t] for t >= tau (1-based tau),
// noise sd sd_before / sd_after. Returns the full log-likelihood.
inline double changepoint_loglik(const std::vector<double>& y, const std::vector<double>& mean_before,
                                 const std::vector<double>& mean_after, double sd_before, double sd_after, int tau) {
    double ll = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const int t = static_cast<int>(k) + 1;
        ll += t < tau ? normal_logpdf(y[k], mean_before[k], sd_before) : normal_logpdf(y[k], mean_after[k], sd_after);
    }
    return ll;
}

}  // namespace oracle
