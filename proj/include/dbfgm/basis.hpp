#pragma once

#include "dbfgm/core_types.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dbfgm {

enum class BasisKind { bspline, polynomial };

inline std::string to_string(BasisKind k) { return k == BasisKind::bspline ? "bspline" : "polynomial"; }

inline BasisKind parse_basis_kind(const std::string& s) {
    if (s == "bspline") return BasisKind::bspline;
    if (s == "polynomial") return BasisKind::polynomial;
    throw ValidationError("InvalidConfig", "unknown basis '" + s + "'", {{"field", "basis"}, {"reason", "unknown value"}});
}

/// T x K evaluations f_k(time_grid[t]).
struct BasisMatrix {
    Matrix values;
    BasisKind kind = BasisKind::bspline;
    int degree = 0;
    std::vector<double> knots;  // full clamped knot vector (bspline only)

    int K() const noexcept { return static_cast<int>(values.cols()); }
    int T() const noexcept { return static_cast<int>(values.rows()); }

    /// Coefficient vector w with values * w == 1, if the span holds constants.
    std::optional<Vector> constant_coefficients() const {
        const Index k = values.cols();
        switch (kind) {
        case BasisKind::polynomial: return Vector::Unit(k, 0);
        case BasisKind::bspline: return Vector::Ones(k);  // partition of unity
        }
        return std::nullopt;
    }
};

namespace detail {

inline void require_increasing(std::span<const double> grid) {
    if (grid.empty()) throw ValidationError("ShapeMismatch", "empty time grid");
    for (std::size_t t = 1; t < grid.size(); ++t) {
        if (!(grid[t] > grid[t - 1])) {
            throw ValidationError("NonIncreasingGrid", "time grid is not strictly increasing",
                                  {{"t", std::to_string(t + 1)}});
        }
    }
}

// Index of the knot span [knots[s], knots[s+1]) holding x, clamped so the
// right end of the domain falls in the last non-empty span.
inline std::size_t find_span(double x, int degree, int K, const std::vector<double>& knots) {
    const auto n = static_cast<std::size_t>(K - 1);
    if (x >= knots[n + 1]) return n;
    if (x <= knots[static_cast<std::size_t>(degree)]) return static_cast<std::size_t>(degree);
    auto it = std::upper_bound(knots.begin() + degree, knots.begin() + static_cast<long>(n) + 2, x);
    return static_cast<std::size_t>(it - knots.begin()) - 1;
}

}  // namespace detail

/// Clamped uniform knot vector with K - degree - 1 interior knots on [lo, hi].
inline std::vector<double> clamped_uniform_knots(double lo, double hi, int K, int degree) {
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(K + degree + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(lo);
    const int interior = K - degree - 1;
    for (int m = 1; m <= interior; ++m) knots.push_back(lo + (hi - lo) * m / (interior + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(hi);
    return knots;
}

/// B-spline basis of the given degree (order degree + 1) on a clamped
/// uniform knot vector spanning the grid. Rows form a partition of unity.
inline BasisMatrix bspline_basis(std::span<const double> time_grid, int K, int degree) {
    if (degree < 0) throw ValidationError("InvalidConfig", "degree must be nonnegative", {{"field", "degree"}});
    if (K < degree + 1) {
        throw ValidationError("InsufficientBasisSize",
                              "B-spline basis of degree " + std::to_string(degree) + " needs K >= " +
                                  std::to_string(degree + 1),
                              {{"K", std::to_string(K)}, {"degree", std::to_string(degree)}});
    }
    detail::require_increasing(time_grid);
    const double lo = time_grid.front();
    const double hi = time_grid.back();
    if (!(hi > lo) && K > 1) throw ValidationError("DegenerateGrid", "B-spline basis needs a grid of positive width");

    BasisMatrix out;
    out.kind = BasisKind::bspline;
    out.degree = degree;
    out.knots = clamped_uniform_knots(lo, hi, K, degree);
    out.values = Matrix::Zero(static_cast<Index>(time_grid.size()), K);
    const auto& U = out.knots;

    // Nonzero basis functions on a span (Piegl & Tiller, algorithm A2.2).
    std::vector<double> N(static_cast<std::size_t>(degree + 1)), left(N.size()), right(N.size());
    for (std::size_t r = 0; r < time_grid.size(); ++r) {
        const double x = time_grid[r];
        const std::size_t span = K == 1 ? 0 : detail::find_span(x, degree, K, U);
        N[0] = 1.0;
        for (int j = 1; j <= degree; ++j) {
            left[static_cast<std::size_t>(j)] = x - U[span + 1 - static_cast<std::size_t>(j)];
            right[static_cast<std::size_t>(j)] = U[span + static_cast<std::size_t>(j)] - x;
            double saved = 0.0;
            for (int q = 0; q < j; ++q) {
                const double denom = right[static_cast<std::size_t>(q + 1)] + left[static_cast<std::size_t>(j - q)];
                const double tmp = N[static_cast<std::size_t>(q)] / denom;
                N[static_cast<std::size_t>(q)] = saved + right[static_cast<std::size_t>(q + 1)] * tmp;
                saved = left[static_cast<std::size_t>(j - q)] * tmp;
            }
            N[static_cast<std::size_t>(j)] = saved;
        }
        for (int q = 0; q <= degree; ++q) {
            out.values(static_cast<Index>(r), static_cast<Index>(span) - degree + q) = N[static_cast<std::size_t>(q)];
        }
    }
    return out;
}

/// Monomials 1, u, ..., u^{K-1} of the grid rescaled to u in [0, 1].
inline BasisMatrix polynomial_basis(std::span<const double> time_grid, int K) {
    if (K < 1) throw ValidationError("InsufficientBasisSize", "polynomial basis needs K >= 1", {{"K", std::to_string(K)}});
    if (time_grid.empty()) throw ValidationError("ShapeMismatch", "empty time grid");
    const auto [mn, mx] = std::minmax_element(time_grid.begin(), time_grid.end());
    if (!(*mx > *mn)) throw ValidationError("DegenerateGrid", "polynomial basis needs t_max > t_min");
    BasisMatrix out;
    out.kind = BasisKind::polynomial;
    out.degree = K - 1;
    out.values = Matrix(static_cast<Index>(time_grid.size()), K);
    for (std::size_t r = 0; r < time_grid.size(); ++r) {
        const double u = (time_grid[r] - *mn) / (*mx - *mn);
        double pw = 1.0;
        for (int k = 0; k < K; ++k, pw *= u) out.values(static_cast<Index>(r), k) = pw;
    }
    return out;
}

inline BasisMatrix make_basis(BasisKind kind, std::span<const double> time_grid, int K, int degree) {
    return kind == BasisKind::bspline ? bspline_basis(time_grid, K, degree) : polynomial_basis(time_grid, K);
}

/// p x pK block-diagonal design F(t) with `basis_row` repeated on each block.
inline Matrix block_design(const Eigen::Ref<const Eigen::RowVectorXd>& basis_row, int p) {
    const Index K = basis_row.size();
    Matrix F = Matrix::Zero(p, p * K);
    for (int j = 0; j < p; ++j) F.block(j, j * K, 1, K) = basis_row;
    return F;
}

}  // namespace dbfgm
