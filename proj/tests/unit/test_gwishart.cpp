#include <catch_amalgamated.hpp>

#include "dbfgm/gwishart.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

using namespace dbfgm;

namespace {

Graph random_graph(int p, double prob, Rng& rng) {
    Graph g = Graph::Zero(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) g(a, b) = g(b, a) = rng.uniform() < prob ? 1 : 0;
    }
    return g;
}

bool respects_pattern(const Matrix& K, const CoefGraph& g) {
    for (Index a = 0; a < K.rows(); ++a) {
        for (Index b = a + 1; b < K.cols(); ++b) {
            if (!g.adjacency(a, b) && K(a, b) != 0.0) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("expand_graph gives full diagonal blocks and copies functional edges", "[gwishart]") {
    Graph f = Graph::Zero(3, 3);
    f(0, 2) = f(2, 0) = 1;
    const auto g = expand_graph(f, 2);
    REQUIRE(g.dim() == 6);
    REQUIRE(g.adjacency(0, 1) == 1);
    REQUIRE(g.adjacency(0, 0) == 0);
    REQUIRE(g.adjacency(0, 4) == 1);
    REQUIRE(g.adjacency(1, 5) == 1);
    REQUIRE(g.adjacency(0, 2) == 0);
    REQUIRE(g.adjacency(2, 4) == 0);
    REQUIRE(g.adjacency == g.adjacency.transpose());
}

TEST_CASE("expand_graph rejects an asymmetric functional graph", "[gwishart]") {
    Graph f = Graph::Zero(2, 2);
    f(0, 1) = 1;
    REQUIRE_THROWS_AS(expand_graph(f, 2), ValidationError);
}

TEST_CASE("G-Wishart draws are SPD with exact zeros off the graph", "[gwishart][property]") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const int p = 2 + trial % 5;
        const int K = 1 + trial % 3;
        const auto g = expand_graph(random_graph(p, 0.4, rng), K);
        const Matrix W = sample_gwishart(g, {}, rng);
        REQUIRE(W == W.transpose());
        REQUIRE(respects_pattern(W, g));
        REQUIRE(Eigen::LLT<Matrix>(W).info() == Eigen::Success);
    }
}

TEST_CASE("Complete-graph draw under the Wishart convention has mean df * I", "[gwishart][property]") {
    // Wishart(df = 3, I_3): E[W] = 3 I, Var(W_ii) = 2 df, Var(W_ij) = df.
    Graph f = Graph::Zero(1, 1);
    const auto g = expand_graph(f, 3);
    GWishartOptions opts;
    opts.df = 3.0;
    opts.convention = WishartDfConvention::wishart;
    Rng rng(99);
    const int N = 20000;
    Matrix mean = Matrix::Zero(3, 3);
    for (int k = 0; k < N; ++k) mean += sample_gwishart(g, opts, rng);
    mean /= N;
    for (Index a = 0; a < 3; ++a) {
        for (Index b = 0; b < 3; ++b) {
            const double target = a == b ? 3.0 : 0.0;
            const double se = std::sqrt((a == b ? 6.0 : 3.0) / N);
            REQUIRE(std::abs(mean(a, b) - target) <= 3.0 * se);
        }
    }
}

TEST_CASE("G-Wishart shape b on a complete graph is Wishart with df = b + dim - 1", "[gwishart][property]") {
    const auto g = expand_graph(Graph::Zero(1, 1), 2);
    GWishartOptions opts;  // b = 3, dim 2 -> df 4
    Rng rng(7);
    const int N = 20000;
    double m = 0.0;
    for (int k = 0; k < N; ++k) m += sample_gwishart(g, opts, rng)(0, 0);
    m /= N;
    REQUIRE(std::abs(m - 4.0) <= 3.0 * std::sqrt(8.0 / N));
}

TEST_CASE("Empty graph gives independent chi-square diagonals", "[gwishart][property]") {
    // With no edges each diagonal is chi-square with b = 3 degrees of freedom.
    const auto g = expand_graph(Graph::Zero(3, 3), 1);
    Rng rng(11);
    const int N = 4000;
    std::vector<double> x;
    for (int k = 0; k < N; ++k) {
        const Matrix W = sample_gwishart(g, {}, rng);
        REQUIRE((W - Matrix(W.diagonal().asDiagonal())).isZero(0.0));
        x.push_back(W(1, 1));
    }
    std::sort(x.begin(), x.end());
    boost::math::chi_squared chi(3.0);
    double d = 0.0;
    for (int k = 0; k < N; ++k) {
        const double F = boost::math::cdf(chi, x[static_cast<std::size_t>(k)]);
        d = std::max({d, F - static_cast<double>(k) / N, static_cast<double>(k + 1) / N - F});
    }
    // 0.999 quantile of the Kolmogorov distribution is about 1.95.
    REQUIRE(d * std::sqrt(static_cast<double>(N)) < 1.95);
}

TEST_CASE("Newton completion agrees with the neighbour-regression fixed point", "[gwishart]") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = expand_graph(random_graph(5, 0.4, rng), 2);
        // Replay the Wishart draw that sample_gwishart makes internally.
        Rng replay = rng;
        const Matrix Sigma = sample_wishart(3.0 + 9.0, Matrix::Identity(10, 10), replay).inverse();
        const Matrix fixed_point = sample_gwishart(g, {}, rng);
        const Matrix newton = detail::newton_completion(g.adjacency, Sigma, {});
        REQUIRE(respects_pattern(newton, g));
        REQUIRE((newton - fixed_point).norm() <= 1e-6 * fixed_point.norm());
        const Matrix W = newton.inverse();
        for (Index r = 0; r < 10; ++r) {
            for (Index c = r; c < 10; ++c) {
                if (r == c || g.adjacency(r, c)) REQUIRE(std::abs(W(r, c) - Sigma(r, c)) <= 1e-7 * Sigma.diagonal().maxCoeff());
            }
        }
    }
}

TEST_CASE("sample_wishart rejects df <= dim - 1", "[gwishart]") {
    Rng rng(1);
    REQUIRE_THROWS_AS(sample_wishart(1.5, Matrix::Identity(3, 3), rng), ValidationError);
}

TEST_CASE("Draws are reproducible from the seed", "[gwishart]") {
    Rng r1(42), r2(42);
    const auto g = expand_graph(random_graph(4, 0.5, r1), 3);
    random_graph(4, 0.5, r2);
    REQUIRE(sample_gwishart(g, {}, r1) == sample_gwishart(g, {}, r2));
}
