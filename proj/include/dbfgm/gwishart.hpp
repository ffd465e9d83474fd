#pragma once

#include "dbfgm/core_types.hpp"
#include "dbfgm/random.hpp"

#include <boost/random/chi_squared_distribution.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace dbfgm {

/// pK x pK coefficient-space graph built from a p x p functional graph.
struct CoefGraph {
    Graph adjacency;
    int p = 0;
    int K = 0;

    Index dim() const noexcept { return adjacency.rows(); }
};

/// Off-diagonal block (j1, j2) takes the functional edge bit; diagonal
/// blocks are fully connected. The diagonal itself is zero.
inline CoefGraph expand_graph(const Graph& func_adj, int K) {
    const Index p = func_adj.rows();
    if (func_adj.cols() != p) throw ValidationError("ShapeMismatch", "functional adjacency must be square");
    if (func_adj != func_adj.transpose()) throw ValidationError("AsymmetricGraph", "functional adjacency must be symmetric");
    CoefGraph out{Graph::Zero(p * K, p * K), static_cast<int>(p), K};
    for (Index a = 0; a < p; ++a) {
        for (Index b = 0; b < p; ++b) {
            const std::uint8_t bit = a == b ? 1 : (func_adj(a, b) != 0 ? 1 : 0);
            out.adjacency.block(a * K, b * K, K, K).setConstant(bit);
        }
    }
    out.adjacency.diagonal().setZero();
    return out;
}

/// Standard Wishart(df, scale) draw via the Bartlett decomposition.
/// Requires df > dim - 1.
inline Matrix sample_wishart(double df, const Matrix& scale, Rng& rng) {
    const Index q = scale.rows();
    if (!(df > static_cast<double>(q) - 1.0)) {
        throw ValidationError("InvalidConfig", "Wishart degrees of freedom must exceed dim - 1",
                              {{"field", "df"}, {"reason", "df <= dim - 1"}});
    }
    Eigen::LLT<Matrix> scale_chol(scale);
    if (scale_chol.info() != Eigen::Success) throw ValidationError("InvalidConfig", "Wishart scale must be SPD");
    Matrix A = Matrix::Zero(q, q);
    for (Index i = 0; i < q; ++i) {
        A(i, i) = std::sqrt(boost::random::chi_squared_distribution<double>(df - static_cast<double>(i))(rng));
        for (Index j = 0; j < i; ++j) A(i, j) = rng.normal();
    }
    const Matrix LA = scale_chol.matrixL() * A;
    Matrix W = LA * LA.transpose();
    return 0.5 * (W + W.transpose());
}

/// How `df` is read. `gwishart_b` is the G-Wishart shape b of the density
/// |K|^{(b-2)/2} exp(-tr(scale^{-1} K)/2); for a complete graph this is a
/// Wishart with df = b + dim - 1. `wishart` reads df as the ordinary
/// Wishart degrees of freedom, i.e. b = df - dim + 1.
enum class WishartDfConvention { gwishart_b, wishart };

struct GWishartOptions {
    double df = 3.0;
    WishartDfConvention convention = WishartDfConvention::gwishart_b;
    int max_sweeps = 200;
    double tolerance = 1e-8;
};

namespace detail {

// Precision K with zeros off `adj` and (K^{-1})_ij = Sigma_ij on the diagonal
// and the edges: Newton's method on tr(Sigma K) - log det K over the free
// entries. Same fixed point as the neighbour-regression sweeps.
inline Matrix newton_completion(const Graph& adj, const Matrix& Sigma, const GWishartOptions& opts) {
    const Index q = Sigma.rows();
    std::vector<std::pair<Index, Index>> free;
    for (Index a = 0; a < q; ++a) {
        for (Index b = a; b < q; ++b) {
            if (a == b || adj(a, b)) free.emplace_back(a, b);
        }
    }
    const auto P = static_cast<Index>(free.size());
    const double scale_ref = Sigma.diagonal().cwiseAbs().maxCoeff();
    auto objective = [&](const Matrix& K, Eigen::LLT<Matrix>& llt) {
        llt.compute(K);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        return Sigma.cwiseProduct(K).sum() - logdet;
    };

    Matrix K = Matrix::Zero(q, q);
    K.diagonal() = Sigma.diagonal().cwiseInverse();
    Eigen::LLT<Matrix> llt;
    double f = objective(K, llt);
    for (int iter = 0; iter < 100; ++iter) {
        const Matrix W = llt.solve(Matrix::Identity(q, q));
        Vector g(P);
        double worst = 0.0;
        for (Index k = 0; k < P; ++k) {
            const auto [a, b] = free[static_cast<std::size_t>(k)];
            const double r = Sigma(a, b) - W(a, b);
            worst = std::max(worst, std::abs(r));
            g(k) = a == b ? r : 2.0 * r;
        }
        if (worst <= opts.tolerance * scale_ref) return K;
        Matrix H(P, P);
        for (Index k = 0; k < P; ++k) {
            const auto [a, b] = free[static_cast<std::size_t>(k)];
            for (Index l = k; l < P; ++l) {
                const auto [c, d] = free[static_cast<std::size_t>(l)];
                double h;
                if (a == b && c == d) h = W(a, c) * W(a, c);
                else if (a == b) h = 2.0 * W(a, c) * W(a, d);
                else if (c == d) h = 2.0 * W(a, c) * W(b, c);
                else h = 2.0 * (W(b, c) * W(a, d) + W(b, d) * W(a, c));
                H(k, l) = H(l, k) = h;
            }
        }
        const Vector step = H.llt().solve(-g);
        const double decrement = -g.dot(step);
        // Stationary to rounding: accept unless the residual is still large.
        if (decrement <= 1e-14 * std::max(1.0, std::abs(f))) {
            if (worst <= 1e-5 * scale_ref) return K;
            break;
        }
        double t = 1.0;
        Matrix Knew;
        double fnew = 0.0;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            Knew = K;
            for (Index k = 0; k < P; ++k) {
                const auto [a, b] = free[static_cast<std::size_t>(k)];
                Knew(a, b) += t * step(k);
                if (a != b) Knew(b, a) = Knew(a, b);
            }
            fnew = objective(Knew, llt);
            if (fnew <= f - 0.25 * t * decrement) break;
        }
        if (!std::isfinite(fnew) || fnew > f) break;
        K = std::move(Knew);
        f = fnew;
    }
    throw NumericalError("NonConvergence", "G-Wishart completion did not converge in " + std::to_string(opts.max_sweeps) +
                                               " sweeps or by Newton refinement");
}

}  // namespace detail

/// G-Wishart draw with identity (or given) scale: sample an unconstrained
/// Wishart, then complete its inverse so that the precision matrix has exact
/// zeros at the non-edges of `graph` (direct sampler of Lenkoski).
inline Matrix sample_gwishart(const CoefGraph& graph, const GWishartOptions& opts, Rng& rng,
                              const Matrix* scale = nullptr) {
    const Index q = graph.dim();
    if (!(opts.df > 2.0) && opts.convention == WishartDfConvention::gwishart_b) {
        throw ValidationError("InvalidConfig", "G-Wishart df must exceed 2", {{"field", "gwishart_df"}});
    }
    const double wishart_df = opts.convention == WishartDfConvention::gwishart_b
                                  ? opts.df + static_cast<double>(q) - 1.0
                                  : opts.df;
    const Matrix S0 = scale ? *scale : Matrix::Identity(q, q);
    const Matrix K0 = sample_wishart(wishart_df, S0, rng);

    const bool complete = (graph.adjacency.array() != 0).count() == q * (q - 1);
    if (complete) return K0;

    const Matrix Sigma = K0.llt().solve(Matrix::Identity(q, q));
    Matrix W = Sigma;
    std::vector<std::vector<Index>> neighbors(static_cast<std::size_t>(q));
    for (Index j = 0; j < q; ++j) {
        for (Index r = 0; r < q; ++r) {
            if (r != j && graph.adjacency(r, j)) neighbors[static_cast<std::size_t>(j)].push_back(r);
        }
    }
    const double scale_ref = Sigma.diagonal().cwiseAbs().maxCoeff();
    bool converged = false;
    for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
        double change = 0.0;
        for (Index j = 0; j < q; ++j) {
            const auto& nb = neighbors[static_cast<std::size_t>(j)];
            Vector col = Vector::Zero(q);
            if (!nb.empty()) {
                const Index m = static_cast<Index>(nb.size());
                Matrix Wnn(m, m);
                Vector sn(m);
                for (Index a = 0; a < m; ++a) {
                    sn(a) = Sigma(nb[static_cast<std::size_t>(a)], j);
                    for (Index b = 0; b < m; ++b) Wnn(a, b) = W(nb[static_cast<std::size_t>(a)], nb[static_cast<std::size_t>(b)]);
                }
                const Vector beta = Wnn.llt().solve(sn);
                for (Index r = 0; r < q; ++r) {
                    if (r == j) continue;
                    double v = 0.0;
                    for (Index a = 0; a < m; ++a) v += W(r, nb[static_cast<std::size_t>(a)]) * beta(a);
                    col(r) = v;
                }
            }
            for (Index r = 0; r < q; ++r) {
                if (r == j) continue;
                change = std::max(change, std::abs(W(r, j) - col(r)));
                W(r, j) = col(r);
                W(j, r) = col(r);
            }
        }
        converged = change <= opts.tolerance * scale_ref;
    }
    if (!converged) return detail::newton_completion(graph.adjacency, Sigma, opts);

    Matrix Kmat = W.llt().solve(Matrix::Identity(q, q));
    for (Index a = 0; a < q; ++a) {
        for (Index b = a + 1; b < q; ++b) {
            const double v = graph.adjacency(a, b) ? 0.5 * (Kmat(a, b) + Kmat(b, a)) : 0.0;
            Kmat(a, b) = Kmat(b, a) = v;
        }
    }
    if (Eigen::LLT<Matrix>(Kmat).info() != Eigen::Success) {
        throw NumericalError("NonConvergence", "completed G-Wishart draw is not positive definite");
    }
    return Kmat;
}

}  // namespace dbfgm
