#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dbfgm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Graph = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
//  Errors
// ---------------------------------------------------------------------------

/// Base class for all library errors. `code()` is a stable machine-readable
/// identifier such as "NonFiniteValue"; `fields()` carries the offending
/// indices or values as strings.
class Error : public std::runtime_error {
public:
    using Fields = std::vector<std::pair<std::string, std::string>>;

    Error(std::string code, const std::string& message, Fields fields = {})
        : std::runtime_error(message), code_(std::move(code)), fields_(std::move(fields)) {}

    const std::string& code() const noexcept { return code_; }
    const Fields& fields() const noexcept { return fields_; }
    virtual int exit_code() const noexcept { return 1; }

private:
    std::string code_;
    Fields fields_;
};

/// Bad input: malformed data, configuration, or shapes.
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

/// Numerical breakdown inside a computation (failed factorization,
/// non-converging completion, ...).
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// ---------------------------------------------------------------------------
//  FunctionalDataset
// ---------------------------------------------------------------------------

/// Replicated multivariate functional observations Y[i][j][t] on a shared grid.
/// Storage is row-major over (replicate, function, time); indices are 0-based
/// in the C++ API and 1-based in files and error messages.
class FunctionalDataset {
public:
    FunctionalDataset() = default;

    FunctionalDataset(int n, int p, int T, std::vector<double> values, std::vector<double> time_grid)
        : n_(n), p_(p), T_(T), values_(std::move(values)), time_grid_(std::move(time_grid)) {}

    /// Zero-filled dataset on the grid 1..T.
    static FunctionalDataset zeros(int n, int p, int T) {
        std::vector<double> grid(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) grid[static_cast<std::size_t>(t)] = t + 1.0;
        return {n, p, T, std::vector<double>(static_cast<std::size_t>(n) * p * T, 0.0), std::move(grid)};
    }

    int n() const noexcept { return n_; }
    int p() const noexcept { return p_; }
    int T() const noexcept { return T_; }

    double& operator()(int i, int j, int t) { return values_[offset(i, j, t)]; }
    double operator()(int i, int j, int t) const { return values_[offset(i, j, t)]; }

    /// p x T view of replicate i.
    Eigen::Map<const RowMatrix> replicate(int i) const {
        return {values_.data() + static_cast<std::size_t>(i) * p_ * T_, p_, T_};
    }
    Eigen::Map<RowMatrix> replicate(int i) {
        return {values_.data() + static_cast<std::size_t>(i) * p_ * T_, p_, T_};
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& time_grid() const noexcept { return time_grid_; }

private:
    std::size_t offset(int i, int j, int t) const {
        return (static_cast<std::size_t>(i) * p_ + j) * T_ + t;
    }

    int n_ = 0;
    int p_ = 0;
    int T_ = 0;
    std::vector<double> values_;
    std::vector<double> time_grid_;
};

/// Throws ValidationError (ShapeMismatch, NonIncreasingGrid, NonFiniteValue)
/// unless every dataset invariant holds.
inline void validate_dataset(const FunctionalDataset& data) {
    if (data.n() <= 0 || data.p() <= 0 || data.T() <= 0) {
        throw ValidationError("ShapeMismatch", "dataset dimensions n, p, T must be positive");
    }
    const auto expected = static_cast<std::size_t>(data.n()) * data.p() * data.T();
    if (data.values().size() != expected) {
        throw ValidationError("ShapeMismatch",
                              "dataset holds " + std::to_string(data.values().size()) + " values, expected " +
                                  std::to_string(expected));
    }
    if (data.time_grid().size() != static_cast<std::size_t>(data.T())) {
        throw ValidationError("ShapeMismatch", "time grid length differs from T");
    }
    const auto& grid = data.time_grid();
    for (std::size_t t = 0; t < grid.size(); ++t) {
        if (!std::isfinite(grid[t]) || (t > 0 && !(grid[t] > grid[t - 1]))) {
            throw ValidationError("NonIncreasingGrid",
                                  "time grid is not strictly increasing at index " + std::to_string(t + 1),
                                  {{"t", std::to_string(t + 1)}});
        }
    }
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.p(); ++j) {
            for (int t = 0; t < data.T(); ++t) {
                if (!std::isfinite(data(i, j, t))) {
                    throw ValidationError("NonFiniteValue",
                                          "non-finite value at (" + std::to_string(i + 1) + "," +
                                              std::to_string(j + 1) + "," + std::to_string(t + 1) + ")",
                                          {{"i", std::to_string(i + 1)},
                                           {"j", std::to_string(j + 1)},
                                           {"t", std::to_string(t + 1)}});
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
//  Hyperparameters
// ---------------------------------------------------------------------------

/// How the Gamma shape of the diagonal-column variable b is formed.
/// `replicates` gives n/2 + 1 (the number of coefficient replicates entering
/// the scatter matrix); `segment_length` gives |T_s|/2 + 1.
enum class GammaShapeConvention { replicates, segment_length };

inline std::string to_string(GammaShapeConvention c) {
    return c == GammaShapeConvention::replicates ? "replicates" : "segment_length";
}

inline GammaShapeConvention parse_gamma_shape_convention(const std::string& s) {
    if (s == "replicates") return GammaShapeConvention::replicates;
    if (s == "segment_length") return GammaShapeConvention::segment_length;
    throw ValidationError("InvalidConfig", "unknown gamma shape convention '" + s + "'",
                          {{"field", "omega_gamma_shape_convention"}, {"reason", "unknown value"}});
}

struct TauBounds {
    int min = 0;
    int max = 0;
};

/// Fixed prior constants of the model.
struct Hyperparameters {
    int K = 5;
    int S = 2;
    double lambda = 1.0;
    double v0 = 0.02;
    double h = 50.0;
    double alpha = 2.0;
    double beta = 7.0;
    double alpha0 = 1.0;
    double beta0 = 1.0;
    std::optional<double> pi0_fixed = 1.0;
    double alpha_sigma = 0.01;
    double beta_sigma = 0.01;
    // Global changepoint support. Unset bounds resolve to ceil(0.05 T) and
    // floor(0.95 T).
    std::optional<int> tau_min;
    std::optional<int> tau_max;
    // Optional per-changepoint intervals; overrides the global support.
    std::vector<TauBounds> tau_intervals;
    GammaShapeConvention omega_gamma_shape_convention = GammaShapeConvention::replicates;

    double v1() const noexcept { return h * v0; }

    /// Support interval of changepoint m (0-based) on a grid of length T.
    TauBounds tau_bounds(int m, int T) const {
        if (!tau_intervals.empty()) return tau_intervals.at(static_cast<std::size_t>(m));
        const int lo = tau_min.value_or(static_cast<int>(std::ceil(0.05 * T)));
        const int hi = tau_max.value_or(static_cast<int>(std::floor(0.95 * T)));
        return {lo, hi};
    }
};

/// Throws ValidationError(InvalidConfig) on any violated constraint. `T` is
/// needed to check the changepoint support; pass 0 to skip that part.
inline void validate_hyperparameters(const Hyperparameters& hp, int T = 0) {
    auto fail = [](const std::string& field, const std::string& reason) {
        throw ValidationError("InvalidConfig", "invalid " + field + ": " + reason,
                              {{"field", field}, {"reason", reason}});
    };
    if (hp.K < 1) fail("K", "must be positive");
    if (hp.S < 1) fail("S", "must be at least 1");
    if (!(hp.lambda > 0)) fail("lambda", "must be positive");
    if (!(hp.v0 > 0)) fail("v0", "must be positive");
    if (!(hp.h > 1)) fail("h", "must exceed 1");
    if (!(hp.alpha > 0) || !(hp.beta > 0)) fail("alpha/beta", "must be positive");
    if (!(hp.alpha0 > 0) || !(hp.beta0 > 0)) fail("alpha0/beta0", "must be positive");
    if (hp.pi0_fixed && !(*hp.pi0_fixed > 0 && *hp.pi0_fixed <= 1)) fail("pi0_fixed", "must lie in (0, 1]");
    if (!(hp.alpha_sigma > 0) || !(hp.beta_sigma > 0)) fail("alpha_sigma/beta_sigma", "must be positive");
    if (!hp.tau_intervals.empty() && static_cast<int>(hp.tau_intervals.size()) != hp.S - 1) {
        fail("tau_intervals", "need exactly S-1 intervals");
    }
    if (T > 0 && hp.S >= 2) {
        int prev = 1;
        for (int m = 0; m < hp.S - 1; ++m) {
            const auto b = hp.tau_bounds(m, T);
            if (b.min <= 1 || b.max >= T || b.min > b.max) {
                fail("tau_min/tau_max", "need 1 < tau_min <= tau_max < T");
            }
            // Changepoint m needs at least one admissible value above the previous one.
            const int lowest = std::max(b.min, prev + 1);
            if (lowest > b.max) fail("tau_min/tau_max", "support cannot hold S-1 ordered changepoints");
            prev = lowest;
        }
    }
}

// ---------------------------------------------------------------------------
//  Changepoints
// ---------------------------------------------------------------------------

/// Strictly increasing 1-based changepoints (tau_1, ..., tau_{S-1}).
/// Segment s (1-based) covers tau_{s-1} <= t < tau_s with tau_0 = 1, and the
/// last segment runs through T inclusive.
struct ChangepointVector {
    std::vector<int> taus;

    int segments() const noexcept { return static_cast<int>(taus.size()) + 1; }

    /// 0-based half-open range [begin, end) of time indices in segment s (0-based).
    std::pair<int, int> range(int s, int T) const {
        const int begin = s == 0 ? 0 : taus[static_cast<std::size_t>(s - 1)] - 1;
        const int end = s == segments() - 1 ? T : taus[static_cast<std::size_t>(s)] - 1;
        return {begin, end};
    }

    int length(int s, int T) const {
        auto [b, e] = range(s, T);
        return e - b;
    }

    bool operator==(const ChangepointVector&) const = default;
};

inline void validate_changepoints(const ChangepointVector& cps, int T) {
    int prev = 1;
    for (int tau : cps.taus) {
        if (tau <= prev || tau >= T) {
            throw ValidationError("InvalidChangepoints", "changepoints must satisfy 1 < tau_1 < ... < T",
                                  {{"tau", std::to_string(tau)}});
        }
        prev = tau;
    }
}

/// 1-based segment containing the 1-based time index t.
inline int segment_of(int t, const ChangepointVector& cps, int T) {
    if (t < 1 || t > T) {
        throw ValidationError("OutOfRange", "time index " + std::to_string(t) + " outside 1.." + std::to_string(T),
                              {{"t", std::to_string(t)}});
    }
    int s = 1;
    for (int tau : cps.taus) {
        if (t >= tau) ++s;
    }
    return s;
}

// ---------------------------------------------------------------------------
//  Block helpers
// ---------------------------------------------------------------------------

/// Number of unordered pairs among `m` items.
constexpr Index pair_count(Index m) noexcept { return m * (m - 1) / 2; }

/// Position of the pair (a, b), a < b, in row-major strict-upper-triangle order.
constexpr Index pair_index(Index a, Index b, Index m) noexcept {
    return a * m - a * (a + 1) / 2 + (b - a - 1);
}

// ---------------------------------------------------------------------------
//  SegmentState
// ---------------------------------------------------------------------------

/// Latent state of one segment. `covariance` is kept equal to omega^{-1} by
/// the sampler so that column updates avoid a fresh inversion.
struct SegmentState {
    Matrix omega;
    Matrix covariance;
    Graph graph;
    Matrix block_probs;  // p x p; off-diagonal entries pi_{j1 j2}, diagonal unused
    double pi0 = 1.0;
    Matrix coeffs;       // n x pK
    double sigma_eps = 1.0;

    static SegmentState initial(int p, int K, int n, double pi0) {
        const Index q = static_cast<Index>(p) * K;
        SegmentState st;
        st.omega = Matrix::Identity(q, q);
        st.covariance = Matrix::Identity(q, q);
        st.graph = Graph::Zero(q, q);
        st.block_probs = Matrix::Constant(p, p, 0.5);
        st.pi0 = pi0;
        st.coeffs = Matrix::Zero(n, q);
        return st;
    }
};

/// Throws NumericalError / ValidationError if the segment state breaks an invariant.
inline void check_segment_state(const SegmentState& st) {
    if (st.omega.rows() != st.omega.cols()) throw ValidationError("ShapeMismatch", "omega is not square");
    if (st.omega != st.omega.transpose()) throw NumericalError("AsymmetricOmega", "omega is not exactly symmetric");
    Eigen::LLT<Matrix> llt(st.omega);
    if (llt.info() != Eigen::Success) throw NumericalError("FactorizationFailure", "omega is not positive definite");
    if (st.graph != st.graph.transpose()) throw ValidationError("AsymmetricGraph", "graph is not symmetric");
    for (Index i = 0; i < st.graph.rows(); ++i) {
        if (st.graph(i, i) != 0) throw ValidationError("GraphDiagonal", "graph diagonal must be zero");
    }
    if ((st.graph.array() > 1).any()) throw ValidationError("GraphEntries", "graph entries must be 0 or 1");
    if ((st.block_probs.array() < 0).any() || (st.block_probs.array() > 1).any() || st.pi0 < 0 || st.pi0 > 1) {
        throw ValidationError("BlockProbability", "block probabilities must lie in [0, 1]");
    }
}

// ---------------------------------------------------------------------------
//  Graph estimates
// ---------------------------------------------------------------------------

/// p x p functional adjacency: edge (j1, j2) iff its K x K block of the
/// coefficient graph holds at least one edge.
inline Graph functional_graph(const Graph& coef_graph, int p, int K) {
    if (coef_graph.rows() != static_cast<Index>(p) * K || coef_graph.cols() != coef_graph.rows()) {
        throw ValidationError("ShapeMismatch", "coefficient graph must be pK x pK");
    }
    Graph out = Graph::Zero(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) {
            const bool any = (coef_graph.block(static_cast<Index>(a) * K, static_cast<Index>(b) * K, K, K).array() != 0).any();
            out(a, b) = out(b, a) = any ? 1 : 0;
        }
    }
    return out;
}

struct GraphEstimate {
    Matrix coef_probs;
    Graph coef_graph;
    Graph func_graph;
    double threshold = 0.5;
};

// ---------------------------------------------------------------------------
//  Posterior samples
// ---------------------------------------------------------------------------

/// Strict upper triangle of a symmetric 0/1 matrix, row-major.
struct PackedGraph {
    Index dim = 0;
    std::vector<std::uint8_t> bits;

    static PackedGraph pack(const Graph& g) {
        PackedGraph out{g.rows(), {}};
        out.bits.reserve(static_cast<std::size_t>(pair_count(g.rows())));
        for (Index a = 0; a < g.rows(); ++a) {
            for (Index b = a + 1; b < g.cols(); ++b) out.bits.push_back(g(a, b));
        }
        return out;
    }

    Graph unpack() const {
        Graph g = Graph::Zero(dim, dim);
        std::size_t k = 0;
        for (Index a = 0; a < dim; ++a) {
            for (Index b = a + 1; b < dim; ++b, ++k) g(a, b) = g(b, a) = bits[k];
        }
        return g;
    }
};

struct SegmentDraw {
    PackedGraph graph;
    std::vector<double> block_probs;  // pi_{j1 j2} in pair_index order
    double pi0 = 1.0;
    double sigma_eps = 0.0;
    std::optional<Matrix> omega;
};

struct IterationRecord {
    int iteration = 0;  // 1-based sweep number
    ChangepointVector changepoints;
    std::vector<SegmentDraw> segments;
    double deviance = 0.0;  // -2 log-likelihood of Y at this draw
};

/// Thinned post-burn-in draws plus running summaries that are too large to
/// keep per iteration.
struct PosteriorSamples {
    int n = 0;
    int p = 0;
    int K = 0;
    int T = 0;
    int S = 1;
    int total_iters = 0;
    int burn_in = 0;
    int thin = 1;
    std::uint64_t rng_seed = 0;
    std::vector<IterationRecord> records;

    // Posterior means of the coefficients (n x pK per segment) over the
    // stored iterations; empty in prior-only runs.
    std::vector<Matrix> coef_mean;

    // Geweke z-scores of every coefficient trace (n x pK per segment), filled
    // when coefficient monitoring is enabled.
    std::vector<Matrix> coef_geweke_z;

    int expected_records() const noexcept { return (total_iters - burn_in) / thin; }
};

}  // namespace dbfgm
