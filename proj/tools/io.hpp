#pragma once

#include "dbfgm/calibrate.hpp"
#include "dbfgm/core_types.hpp"
#include "dbfgm/sampler.hpp"
#include "dbfgm/simulate.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dbfgm::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("IoError", "cannot write " + path.string(), {{"path", path.string()}});
        out << content;
        if (!out) throw ValidationError("IoError", "write failed for " + path.string(), {{"path", path.string()}});
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("IoError", "cannot read " + path.string(), {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("InvalidConfig", "malformed JSON in " + path.string() + ": " + e.what(),
                              {{"field", path.string()}, {"reason", "parse error"}});
    }
}

inline void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
//  Matrices and graphs
// ---------------------------------------------------------------------------

inline std::string matrix_csv(const Matrix& M) {
    std::string out;
    for (Index r = 0; r < M.rows(); ++r) {
        for (Index c = 0; c < M.cols(); ++c) {
            if (c) out += ',';
            out += format_double(M(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::string graph_csv(const Graph& G) {
    std::string out;
    for (Index r = 0; r < G.rows(); ++r) {
        for (Index c = 0; c < G.cols(); ++c) {
            if (c) out += ',';
            out += G(r, c) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, bool skip_header = false) {
    std::ifstream in(path);
    if (!in) throw ValidationError("IoError", "cannot read " + path.string(), {{"path", path.string()}});
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Graph read_graph_csv(const fs::path& path) {
    const auto rows = read_numeric_csv(path);
    const auto d = static_cast<Index>(rows.size());
    Graph g = Graph::Zero(d, d);
    for (Index r = 0; r < d; ++r) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != d) {
            throw ValidationError("ShapeMismatch", "graph CSV must be square: " + path.string());
        }
        for (Index c = 0; c < d; ++c) g(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] != 0 ? 1 : 0;
    }
    return g;
}

// ---------------------------------------------------------------------------
//  Datasets
// ---------------------------------------------------------------------------

inline void write_dataset(const fs::path& dir, const FunctionalDataset& data) {
    std::string csv = "replicate,function,time_index,value\n";
    csv.reserve(csv.size() + static_cast<std::size_t>(data.n()) * data.p() * data.T() * 32);
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.p(); ++j) {
            for (int t = 0; t < data.T(); ++t) {
                csv += std::to_string(i + 1) + ',' + std::to_string(j + 1) + ',' + std::to_string(t + 1) + ',' +
                       format_double(data(i, j, t)) + '\n';
            }
        }
    }
    write_atomic(dir / "data.csv", csv);
    json meta;
    meta["n"] = data.n();
    meta["p"] = data.p();
    meta["T"] = data.T();
    meta["time_grid"] = data.time_grid();
    write_json(dir / "meta.json", meta);
}

/// Reads the long-form CSV and its metadata. Missing cells stay NaN so that
/// validation reports them as non-finite values.
inline FunctionalDataset read_dataset(const fs::path& csv, const fs::path& meta_path) {
    const auto meta = read_json(meta_path);
    int n = 0, p = 0, T = 0;
    std::vector<double> grid;
    try {
        n = meta.at("n").get<int>();
        p = meta.at("p").get<int>();
        T = meta.at("T").get<int>();
        grid = meta.contains("time_grid") ? meta.at("time_grid").get<std::vector<double>>() : unit_time_grid(T);
    } catch (const json::exception& e) {
        throw ValidationError("InvalidConfig", std::string("bad metadata: ") + e.what(), {{"field", "meta"}, {"reason", e.what()}});
    }
    if (n < 1 || p < 1 || T < 1) throw ValidationError("ShapeMismatch", "metadata n, p, T must be positive");
    std::vector<double> values(static_cast<std::size_t>(n) * p * T, std::numeric_limits<double>::quiet_NaN());
    const auto rows = read_numeric_csv(csv, true);
    for (const auto& r : rows) {
        if (r.size() != 4) throw ValidationError("ShapeMismatch", "data rows need 4 columns");
        const auto i = static_cast<long>(r[0]) - 1;
        const auto j = static_cast<long>(r[1]) - 1;
        const auto t = static_cast<long>(r[2]) - 1;
        if (i < 0 || i >= n || j < 0 || j >= p || t < 0 || t >= T) {
            throw ValidationError("ShapeMismatch", "index outside the declared n, p, T");
        }
        values[(static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)) * T + static_cast<std::size_t>(t)] = r[3];
    }
    FunctionalDataset data(n, p, T, std::move(values), std::move(grid));
    validate_dataset(data);
    return data;
}

// ---------------------------------------------------------------------------
//  Configuration
// ---------------------------------------------------------------------------

/// Flat JSON configuration with key tracking so that unknown keys fail.
class Config {
public:
    Config() = default;
    explicit Config(json j) : j_(std::move(j)) {
        if (!j_.is_object()) throw ValidationError("InvalidConfig", "configuration must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& raw() const noexcept { return j_; }

    template <typename T>
    void get(const std::string& key, T& out) {
        used_.insert(key);
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError("InvalidConfig", "invalid " + key + ": wrong type", {{"field", key}, {"reason", "wrong type"}});
        }
    }

    template <typename T>
    void get(const std::string& key, std::optional<T>& out) {
        used_.insert(key);
        if (!has(key)) return;
        T v{};
        get(key, v);
        out = v;
    }

    void set(const std::string& key, json value) { j_[key] = std::move(value); }

    void reject_unknown() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) {
                throw ValidationError("InvalidConfig", "invalid " + key + ": unknown key", {{"field", key}, {"reason", "unknown key"}});
            }
        }
    }

private:
    json j_ = json::object();
    std::set<std::string> used_;
};

inline void read_hyper(Config& c, Hyperparameters& hp) {
    c.get("K", hp.K);
    c.get("S", hp.S);
    c.get("lambda", hp.lambda);
    c.get("v0", hp.v0);
    c.get("h", hp.h);
    c.get("alpha", hp.alpha);
    c.get("beta", hp.beta);
    c.get("alpha0", hp.alpha0);
    c.get("beta0", hp.beta0);
    // An explicit null learns pi0 from its Beta prior.
    if (c.raw().contains("pi0_fixed") && c.raw().at("pi0_fixed").is_null()) hp.pi0_fixed.reset();
    c.get("pi0_fixed", hp.pi0_fixed);
    c.get("alpha_sigma", hp.alpha_sigma);
    c.get("beta_sigma", hp.beta_sigma);
    c.get("tau_min", hp.tau_min);
    c.get("tau_max", hp.tau_max);
    std::vector<std::vector<int>> intervals;
    c.get("tau_intervals", intervals);
    for (const auto& iv : intervals) {
        if (iv.size() != 2) throw ValidationError("InvalidConfig", "invalid tau_intervals: pairs expected", {{"field", "tau_intervals"}});
        hp.tau_intervals.push_back({iv[0], iv[1]});
    }
    std::string conv = to_string(hp.omega_gamma_shape_convention);
    c.get("omega_gamma_shape_convention", conv);
    hp.omega_gamma_shape_convention = parse_gamma_shape_convention(conv);
}

inline json hyper_json(const Hyperparameters& hp) {
    json j;
    j["K"] = hp.K;
    j["S"] = hp.S;
    j["lambda"] = hp.lambda;
    j["v0"] = hp.v0;
    j["h"] = hp.h;
    j["alpha"] = hp.alpha;
    j["beta"] = hp.beta;
    j["alpha0"] = hp.alpha0;
    j["beta0"] = hp.beta0;
    j["pi0_fixed"] = hp.pi0_fixed ? json(*hp.pi0_fixed) : json(nullptr);
    j["alpha_sigma"] = hp.alpha_sigma;
    j["beta_sigma"] = hp.beta_sigma;
    j["tau_min"] = hp.tau_min ? json(*hp.tau_min) : json(nullptr);
    j["tau_max"] = hp.tau_max ? json(*hp.tau_max) : json(nullptr);
    json iv = json::array();
    for (const auto& b : hp.tau_intervals) iv.push_back({b.min, b.max});
    j["tau_intervals"] = iv;
    j["omega_gamma_shape_convention"] = to_string(hp.omega_gamma_shape_convention);
    return j;
}

inline void read_chain(Config& c, ChainConfig& cfg) {
    c.get("total_iters", cfg.total_iters);
    c.get("burn_in", cfg.burn_in);
    c.get("thin", cfg.thin);
    c.get("seed", cfg.seed);
    c.get("store_omega", cfg.store_omega);
    c.get("random_scan", cfg.random_scan);
    c.get("check_spd", cfg.check_spd);
    c.get("monitor_coefficients", cfg.monitor_coefficients);
    c.get("progress_every", cfg.progress_every);
}

inline json chain_json(const ChainConfig& cfg) {
    json j;
    j["total_iters"] = cfg.total_iters;
    j["burn_in"] = cfg.burn_in;
    j["thin"] = cfg.thin;
    j["seed"] = cfg.seed;
    j["store_omega"] = cfg.store_omega;
    j["random_scan"] = cfg.random_scan;
    j["check_spd"] = cfg.check_spd;
    j["monitor_coefficients"] = cfg.monitor_coefficients;
    return j;
}

inline void read_sim(Config& c, SimConfig& cfg) {
    c.get("n", cfg.n);
    c.get("p", cfg.p);
    c.get("T", cfg.T);
    c.get("K", cfg.K);
    c.get("taus", cfg.taus);
    c.get("edge_prob", cfg.edge_prob);
    c.get("noise_sd", cfg.noise_sd);
    std::string kind = to_string(cfg.basis);
    c.get("basis", kind);
    cfg.basis = parse_basis_kind(kind);
    c.get("degree", cfg.degree);
    c.get("gwishart_df", cfg.gwishart_df);
    c.get("seed", cfg.seed);
}

inline json sim_json(const SimConfig& cfg) {
    json j;
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["T"] = cfg.T;
    j["K"] = cfg.K;
    j["taus"] = cfg.taus;
    j["edge_prob"] = cfg.resolved_edge_prob();
    j["noise_sd"] = cfg.noise_sd;
    j["basis"] = to_string(cfg.basis);
    j["degree"] = cfg.degree;
    j["gwishart_df"] = cfg.gwishart_df;
    j["seed"] = cfg.seed;
    return j;
}

inline void read_grid(Config& c, CalibrationGrid& g) {
    c.get("p_values", g.p_values);
    c.get("K_values", g.K_values);
    c.get("h_values", g.h_values);
    c.get("alpha", g.alpha);
    c.get("betas", g.betas);
    c.get("prior_means", g.prior_means);
    c.get("means_per_p", g.means_per_p);
    c.get("lambda", g.lambda);
    c.get("v0", g.v0);
    c.get("samples", g.samples);
    c.get("warmup", g.warmup);
    c.get("seed", g.seed);
}

// ---------------------------------------------------------------------------
//  Sample files
// ---------------------------------------------------------------------------

/// Streams stored iterations to CSV (and optionally binary omega) files in
/// `dir`. Use as the observer of run_chain.
class SampleWriter {
public:
    SampleWriter(fs::path dir, int S, int p, int K, bool store_omega) : dir_(std::move(dir)), S_(S), p_(p), K_(K) {
        open(tau_, "samples_tau.csv");
        open(sigma_, "samples_sigma.csv");
        open(dev_, "deviance.csv");
        std::string th = "iteration";
        for (int m = 1; m < S; ++m) th += ",tau_" + std::to_string(m);
        tau_ << th << '\n';
        std::string sh = "iteration";
        for (int s = 1; s <= S; ++s) sh += ",sigma_s" + std::to_string(s);
        sigma_ << sh << '\n';
        dev_ << "iteration,deviance\n";
        for (int s = 1; s <= S; ++s) {
            graph_.emplace_back();
            open(graph_.back(), "samples_g_s" + std::to_string(s) + ".csv");
            pi_.emplace_back();
            open(pi_.back(), "samples_pi_s" + std::to_string(s) + ".csv");
            std::string ph = "iteration,pi0";
            for (int a = 1; a <= p; ++a) {
                for (int b = a + 1; b <= p; ++b) ph += ",pi_" + std::to_string(a) + "_" + std::to_string(b);
            }
            pi_.back() << ph << '\n';
            if (store_omega) {
                omega_.emplace_back();
                omega_.back().open(dir_ / ("samples_omega_s" + std::to_string(s) + ".bin"), std::ios::binary | std::ios::trunc);
            }
        }
    }

    void operator()(const IterationRecord& rec, const GibbsSampler&) {
        const std::string it = std::to_string(rec.iteration);
        std::string line = it;
        for (int tau : rec.changepoints.taus) line += "," + std::to_string(tau);
        tau_ << line << '\n';
        line = it;
        for (const auto& sd : rec.segments) line += "," + format_double(sd.sigma_eps);
        sigma_ << line << '\n';
        dev_ << it << ',' << format_double(rec.deviance) << '\n';
        for (std::size_t s = 0; s < rec.segments.size(); ++s) {
            const auto& sd = rec.segments[s];
            std::string g(sd.graph.bits.size() * 2, ',');
            for (std::size_t k = 0; k < sd.graph.bits.size(); ++k) g[2 * k] = sd.graph.bits[k] ? '1' : '0';
            g.back() = '\n';
            graph_[s] << g;
            line = it + "," + format_double(sd.pi0);
            for (double v : sd.block_probs) line += "," + format_double(v);
            pi_[s] << line << '\n';
            if (!omega_.empty() && sd.omega) {
                omega_[s].write(reinterpret_cast<const char*>(sd.omega->data()),
                                static_cast<std::streamsize>(sd.omega->size() * sizeof(double)));
            }
        }
        ++records_;
    }

    /// Flushes and writes sidecars; returns the number of stored iterations.
    long finish() {
        for (auto* f : {&tau_, &sigma_, &dev_}) f->close();
        for (auto& f : graph_) f.close();
        for (auto& f : pi_) f.close();
        for (std::size_t s = 0; s < omega_.size(); ++s) {
            omega_[s].close();
            const Index q = static_cast<Index>(p_) * K_;
            json side;
            side["dtype"] = "float64";
            side["order"] = "iteration-major, row-major";
            side["shape"] = {records_, q, q};
            write_json(dir_ / ("samples_omega_s" + std::to_string(s + 1) + ".json"), side);
        }
        return records_;
    }

private:
    void open(std::ofstream& f, const std::string& name) {
        f.open(dir_ / name, std::ios::trunc);
        if (!f) throw ValidationError("IoError", "cannot write " + (dir_ / name).string());
    }

    fs::path dir_;
    int S_, p_, K_;
    long records_ = 0;
    std::ofstream tau_, sigma_, dev_;
    std::vector<std::ofstream> graph_, pi_, omega_;
};

/// Rebuilds a PosteriorSamples store (graphs, block probabilities, sigma, tau,
/// deviance, coefficient summaries) from a fit output directory.
inline PosteriorSamples read_samples(const fs::path& dir) {
    const auto meta = read_json(dir / "chain_meta.json");
    PosteriorSamples out;
    out.n = meta.at("n").get<int>();
    out.p = meta.at("p").get<int>();
    out.K = meta.at("K").get<int>();
    out.T = meta.at("T").get<int>();
    out.S = meta.at("S").get<int>();
    out.total_iters = meta.at("total_iters").get<int>();
    out.burn_in = meta.at("burn_in").get<int>();
    out.thin = meta.at("thin").get<int>();
    out.rng_seed = meta.at("seed").get<std::uint64_t>();

    const auto tau = read_numeric_csv(dir / "samples_tau.csv", true);
    const auto sigma = read_numeric_csv(dir / "samples_sigma.csv", true);
    const auto dev = read_numeric_csv(dir / "deviance.csv", true);
    const Index q = static_cast<Index>(out.p) * out.K;
    out.records.resize(tau.size());
    for (std::size_t k = 0; k < tau.size(); ++k) {
        auto& rec = out.records[k];
        rec.iteration = static_cast<int>(tau[k][0]);
        for (std::size_t m = 1; m < tau[k].size(); ++m) rec.changepoints.taus.push_back(static_cast<int>(tau[k][m]));
        rec.deviance = dev.at(k).at(1);
        rec.segments.resize(static_cast<std::size_t>(out.S));
        for (int s = 0; s < out.S; ++s) rec.segments[static_cast<std::size_t>(s)].sigma_eps = sigma.at(k).at(static_cast<std::size_t>(s) + 1);
    }
    for (int s = 0; s < out.S; ++s) {
        const auto sfx = std::to_string(s + 1);
        std::ifstream g(dir / ("samples_g_s" + sfx + ".csv"));
        std::string line;
        for (auto& rec : out.records) {
            if (!std::getline(g, line)) throw ValidationError("ShapeMismatch", "graph samples shorter than tau samples");
            auto& seg = rec.segments[static_cast<std::size_t>(s)];
            seg.graph.dim = q;
            seg.graph.bits.reserve(static_cast<std::size_t>(pair_count(q)));
            for (std::size_t c = 0; c < line.size(); c += 2) seg.graph.bits.push_back(line[c] == '1' ? 1 : 0);
        }
        const auto pis = read_numeric_csv(dir / ("samples_pi_s" + sfx + ".csv"), true);
        for (std::size_t k = 0; k < out.records.size(); ++k) {
            auto& seg = out.records[k].segments[static_cast<std::size_t>(s)];
            seg.pi0 = pis.at(k).at(1);
            seg.block_probs.assign(pis[k].begin() + 2, pis[k].end());
        }
        const fs::path cm = dir / ("coef_mean_s" + sfx + ".csv");
        if (fs::exists(cm)) {
            const auto rows = read_numeric_csv(cm);
            Matrix M(static_cast<Index>(rows.size()), q);
            for (Index r = 0; r < M.rows(); ++r) {
                for (Index c = 0; c < q; ++c) M(r, c) = rows[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c));
            }
            out.coef_mean.push_back(std::move(M));
        }
        const fs::path gz = dir / ("geweke_coef_s" + sfx + ".csv");
        if (fs::exists(gz)) {
            const auto rows = read_numeric_csv(gz);
            Matrix Z(static_cast<Index>(rows.size()), q);
            for (Index r = 0; r < Z.rows(); ++r) {
                for (Index c = 0; c < q; ++c) Z(r, c) = rows[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c));
            }
            out.coef_geweke_z.push_back(std::move(Z));
        }
    }
    return out;
}

}  // namespace dbfgm::io
