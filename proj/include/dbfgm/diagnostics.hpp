#pragma once

#include "dbfgm/core_types.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace dbfgm {

struct GewekeResult {
    double z = 0.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double se_a = 0.0;
    double se_b = 0.0;
    bool degenerate = false;  // both windows have zero batch-means variance
    bool reject = false;
};

inline double normal_two_sided_critical(double alpha) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

namespace detail {

struct WindowLayout {
    long begin = 0;
    long size = 0;
    long batches = 0;
    long batch_size = 0;

    WindowLayout() = default;
    WindowLayout(long begin_, long size_) : begin(begin_), size(size_) {
        batches = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(size))));
        batch_size = size / batches;
    }
};

struct GewekeLayout {
    WindowLayout a;
    WindowLayout b;
};

inline GewekeLayout geweke_layout(long N, double frac_a, double frac_b) {
    if (!(frac_a > 0 && frac_b > 0 && frac_a + frac_b <= 1)) {
        throw ValidationError("InvalidConfig", "Geweke window fractions must be positive and sum to at most 1");
    }
    if (N < 50) {
        throw ValidationError("ChainTooShort", "Geweke diagnostic needs at least 50 samples, got " + std::to_string(N),
                              {{"samples", std::to_string(N)}});
    }
    const long na = static_cast<long>(std::floor(frac_a * static_cast<double>(N)));
    const long nb = static_cast<long>(std::floor(frac_b * static_cast<double>(N)));
    if (na < 2 || nb < 2) throw ValidationError("ChainTooShort", "Geweke windows need at least two samples each");
    return {WindowLayout(0, na), WindowLayout(N - nb, nb)};
}

// Window mean and batch-means standard error from accumulated sums.
inline void window_stats(const WindowLayout& w, double sum, std::span<const double> batch_sums, double& mean,
                         double& se) {
    mean = sum / static_cast<double>(w.size);
    if (w.batches < 2) {
        se = 0.0;
        return;
    }
    double grand = 0.0;
    for (double bsum : batch_sums) grand += bsum / static_cast<double>(w.batch_size);
    grand /= static_cast<double>(w.batches);
    double ss = 0.0;
    for (double bsum : batch_sums) {
        const double d = bsum / static_cast<double>(w.batch_size) - grand;
        ss += d * d;
    }
    se = std::sqrt(ss / (static_cast<double>(w.batches) * static_cast<double>(w.batches - 1)));
}

inline GewekeResult finish(double mean_a, double se_a, double mean_b, double se_b, double alpha) {
    GewekeResult r{0.0, mean_a, mean_b, se_a, se_b, false, false};
    const double var = se_a * se_a + se_b * se_b;
    if (var > 0.0) {
        r.z = (mean_a - mean_b) / std::sqrt(var);
    } else {
        r.degenerate = true;
        r.z = 0.0;
    }
    r.reject = std::abs(r.z) > normal_two_sided_critical(alpha);
    return r;
}

}  // namespace detail

/// Geweke two-window z-score: compares the mean of the first `frac_a` of the
/// chain with the mean of the last `frac_b`. Standard errors are batch means
/// with ceil(sqrt(window)) batches.
inline GewekeResult geweke(std::span<const double> chain, double frac_a = 0.1, double frac_b = 0.5,
                           double alpha = 0.01) {
    const auto layout = detail::geweke_layout(static_cast<long>(chain.size()), frac_a, frac_b);
    double means[2];
    double ses[2];
    const detail::WindowLayout* windows[2] = {&layout.a, &layout.b};
    for (int w = 0; w < 2; ++w) {
        const auto& win = *windows[w];
        double sum = 0.0;
        std::vector<double> batch_sums(static_cast<std::size_t>(win.batches), 0.0);
        for (long k = 0; k < win.size; ++k) {
            const double x = chain[static_cast<std::size_t>(win.begin + k)];
            sum += x;
            const long b = k / win.batch_size;
            if (b < win.batches) batch_sums[static_cast<std::size_t>(b)] += x;
        }
        detail::window_stats(win, sum, batch_sums, means[w], ses[w]);
    }
    return detail::finish(means[0], ses[0], means[1], ses[1], alpha);
}

/// Streaming form of `geweke` for many scalars at once, used when full
/// traces are too large to keep. Produces the same numbers as `geweke` on
/// the corresponding trace.
class GewekeAccumulator {
public:
    GewekeAccumulator() = default;

    GewekeAccumulator(long total, Index dim, double frac_a = 0.1, double frac_b = 0.5)
        : layout_(detail::geweke_layout(total, frac_a, frac_b)), dim_(dim), total_(total) {
        sum_a_ = Vector::Zero(dim);
        sum_b_ = Vector::Zero(dim);
        batch_a_ = Matrix::Zero(dim, layout_.a.batches);
        batch_b_ = Matrix::Zero(dim, layout_.b.batches);
    }

    Index dim() const noexcept { return dim_; }
    long pushed() const noexcept { return count_; }

    void push(const Eigen::Ref<const Vector>& x) {
        if (count_ >= total_) throw ValidationError("GewekeOverflow", "more samples pushed than declared");
        add(layout_.a, x, sum_a_, batch_a_);
        add(layout_.b, x, sum_b_, batch_b_);
        ++count_;
    }

    std::vector<GewekeResult> results(double alpha = 0.01) const {
        if (count_ != total_) throw ValidationError("ChainTooShort", "Geweke accumulator is incomplete");
        std::vector<GewekeResult> out;
        out.reserve(static_cast<std::size_t>(dim_));
        std::vector<double> ba(static_cast<std::size_t>(layout_.a.batches));
        std::vector<double> bb(static_cast<std::size_t>(layout_.b.batches));
        for (Index d = 0; d < dim_; ++d) {
            for (long k = 0; k < layout_.a.batches; ++k) ba[static_cast<std::size_t>(k)] = batch_a_(d, k);
            for (long k = 0; k < layout_.b.batches; ++k) bb[static_cast<std::size_t>(k)] = batch_b_(d, k);
            double ma, sa, mb, sb;
            detail::window_stats(layout_.a, sum_a_(d), ba, ma, sa);
            detail::window_stats(layout_.b, sum_b_(d), bb, mb, sb);
            out.push_back(detail::finish(ma, sa, mb, sb, alpha));
        }
        return out;
    }

private:
    void add(const detail::WindowLayout& w, const Eigen::Ref<const Vector>& x, Vector& sum, Matrix& batches) const {
        const long k = count_ - w.begin;
        if (k < 0 || k >= w.size) return;
        sum += x;
        const long b = k / w.batch_size;
        if (b < w.batches) batches.col(b) += x;
    }

    detail::GewekeLayout layout_{};
    Index dim_ = 0;
    long total_ = 0;
    long count_ = 0;
    Vector sum_a_, sum_b_;
    Matrix batch_a_, batch_b_;
};

}  // namespace dbfgm
