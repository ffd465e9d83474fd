#include "cli.hpp"

#include "io.hpp"

#include "dbfgm/calibrate.hpp"
#include "dbfgm/inference.hpp"
#include "dbfgm/metrics.hpp"
#include "dbfgm/pipeline.hpp"
#include "dbfgm/sampler.hpp"
#include "dbfgm/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <optional>

namespace dbfgm::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void log(const std::string& msg) { std::clog << "[dbfgm] " << msg << '\n'; }

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("IoError", "cannot create " + out, {{"path", out}});
    return dir;
}

io::Config load_config(const std::string& path) {
    if (path.empty()) return io::Config{};
    return io::Config(io::read_json(path));
}

json manifest(const std::string& command, const json& config, std::uint64_t seed, const json& inputs,
              const std::string& out) {
    json m;
    m["command"] = command;
    m["tool_version"] = version;
    m["seed"] = seed;
    m["config"] = config;
    m["inputs"] = inputs;
    m["output"] = out;
    return m;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

void run_simulate(const SimulateArgs& a) {
    Stopwatch sw;
    auto cfgfile = load_config(a.config);
    SimConfig cfg;
    io::read_sim(cfgfile, cfg);
    cfgfile.reject_unknown();
    if (a.seed) cfg.seed = *a.seed;
    const auto dir = prepare_out_dir(a.out);
    const auto [data, truth] = generate_dataset(cfg);
    const double t_gen = sw.lap();
    io::write_dataset(dir, data);
    for (std::size_t s = 0; s < truth.func_graphs.size(); ++s) {
        io::write_atomic(dir / ("truth_graph_s" + std::to_string(s + 1) + ".csv"), io::graph_csv(truth.func_graphs[s]));
    }
    json tj;
    tj["changepoints"] = truth.changepoints.taus;
    tj["noise_sd"] = truth.noise_sd;
    tj["seed"] = truth.seed;
    tj["p"] = truth.p;
    tj["K"] = truth.K;
    tj["segments"] = truth.func_graphs.size();
    io::write_json(dir / "truth.json", tj);
    io::write_json(dir / "manifest.json", manifest("simulate", io::sim_json(cfg), cfg.seed, {{"config", a.config}}, a.out));
    io::write_json(dir / "timings.json", {{"generate_seconds", t_gen}, {"write_seconds", sw.lap()}});
    log("simulated n=" + std::to_string(cfg.n) + " p=" + std::to_string(cfg.p) + " T=" + std::to_string(cfg.T) + " into " + a.out);
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string data, meta, config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iters, burn_in, thin, K, degree;
    std::optional<std::string> basis;
};

struct FitSettings {
    Hyperparameters hp;
    ChainConfig chain;
    BasisKind basis = BasisKind::bspline;
    int degree = 2;
};

FitSettings read_fit_settings(const std::string& path) {
    auto c = load_config(path);
    FitSettings f;
    io::read_hyper(c, f.hp);
    io::read_chain(c, f.chain);
    std::string kind = to_string(f.basis);
    c.get("basis", kind);
    f.basis = parse_basis_kind(kind);
    c.get("degree", f.degree);
    c.reject_unknown();
    return f;
}

json fit_settings_json(const FitSettings& f) {
    json j = io::hyper_json(f.hp);
    j.update(io::chain_json(f.chain));
    j["basis"] = to_string(f.basis);
    j["degree"] = f.degree;
    return j;
}

void run_fit(const FitArgs& a) {
    Stopwatch sw;
    auto f = read_fit_settings(a.config);
    if (a.seed) f.chain.seed = *a.seed;
    if (a.iters) f.chain.total_iters = *a.iters;
    if (a.burn_in) f.chain.burn_in = *a.burn_in;
    if (a.thin) f.chain.thin = *a.thin;
    if (a.K) f.hp.K = *a.K;
    if (a.degree) f.degree = *a.degree;
    if (a.basis) f.basis = parse_basis_kind(*a.basis);
    validate_chain_config(f.chain);
    const auto data = io::read_dataset(a.data, a.meta);
    validate_hyperparameters(f.hp, data.T());
    const auto basis = make_basis(f.basis, data.time_grid(), f.hp.K, f.degree);
    const double t_load = sw.lap();

    const auto dir = prepare_out_dir(a.out);
    ChainConfig cfg = f.chain;
    cfg.keep_records = false;
    io::SampleWriter writer(dir, f.hp.S, data.p(), f.hp.K, cfg.store_omega);
    log("fitting n=" + std::to_string(data.n()) + " p=" + std::to_string(data.p()) + " T=" + std::to_string(data.T()) +
        " pK=" + std::to_string(data.p() * f.hp.K) + " for " + std::to_string(cfg.total_iters) + " iterations");
    const auto samples = run_chain(data, basis, f.hp, cfg, {}, std::ref(writer));
    const long stored = writer.finish();
    const double t_fit = sw.lap();

    for (std::size_t s = 0; s < samples.coef_mean.size(); ++s) {
        io::write_atomic(dir / ("coef_mean_s" + std::to_string(s + 1) + ".csv"), io::matrix_csv(samples.coef_mean[s]));
    }
    for (std::size_t s = 0; s < samples.coef_geweke_z.size(); ++s) {
        io::write_atomic(dir / ("geweke_coef_s" + std::to_string(s + 1) + ".csv"), io::matrix_csv(samples.coef_geweke_z[s]));
    }
    json meta = {{"n", data.n()},
                 {"p", data.p()},
                 {"K", f.hp.K},
                 {"T", data.T()},
                 {"S", f.hp.S},
                 {"total_iters", cfg.total_iters},
                 {"burn_in", cfg.burn_in},
                 {"thin", cfg.thin},
                 {"seed", cfg.seed},
                 {"records", stored},
                 {"basis", to_string(f.basis)},
                 {"degree", f.degree},
                 {"omega_gamma_shape_convention", to_string(f.hp.omega_gamma_shape_convention)},
                 {"pi0_fixed", f.hp.pi0_fixed ? json(*f.hp.pi0_fixed) : json(nullptr)},
                 {"store_omega", cfg.store_omega},
                 {"random_scan", cfg.random_scan},
                 {"tool_version", version}};
    io::write_json(dir / "chain_meta.json", meta);
    io::write_json(dir / "manifest.json",
                   manifest("fit", fit_settings_json(f), cfg.seed, {{"data", a.data}, {"meta", a.meta}, {"config", a.config}}, a.out));
    io::write_json(dir / "timings.json", {{"load_seconds", t_load}, {"sampling_seconds", t_fit}, {"write_seconds", sw.lap()}});
    log("stored " + std::to_string(stored) + " iterations in " + a.out);
}

// ---------------------------------------------------------------------------

struct SummarizeArgs {
    std::string samples, out, data, meta;
    double threshold = 0.5;
};

json geweke_json(const GewekeReport& rep) {
    json j;
    j["frac_a"] = rep.frac_a;
    j["frac_b"] = rep.frac_b;
    j["alpha"] = rep.alpha;
    j["critical_value"] = normal_two_sided_critical(rep.alpha);
    json scal = json::array();
    for (const auto& e : rep.scalars) {
        scal.push_back({{"name", e.name},
                        {"z", e.result.z},
                        {"reject", e.result.reject},
                        {"degenerate", e.result.degenerate}});
    }
    j["scalars"] = scal;
    j["coefficients_monitored"] = rep.coefficient_count;
    j["coefficient_rejections"] = rep.coefficient_rejections;
    j["coefficient_rejection_rate"] =
        rep.coefficient_count > 0 ? static_cast<double>(rep.coefficient_rejections) / static_cast<double>(rep.coefficient_count) : 0.0;
    j["total_rejections"] = rep.rejections();
    return j;
}

void run_summarize(const SummarizeArgs& a) {
    const fs::path in(a.samples);
    const auto samples = io::read_samples(in);
    const auto dir = prepare_out_dir(a.out);
    for (int s = 0; s < samples.S; ++s) {
        const auto sfx = std::to_string(s + 1) + ".csv";
        const auto est = estimate_graph(samples, s, a.threshold);
        io::write_atomic(dir / ("edge_probs_s" + sfx), io::matrix_csv(est.coef_probs));
        io::write_atomic(dir / ("coef_graph_s" + sfx), io::graph_csv(est.coef_graph));
        io::write_atomic(dir / ("func_graph_s" + sfx), io::graph_csv(est.func_graph));
        io::write_atomic(dir / ("func_edge_probs_s" + sfx), io::matrix_csv(functional_edge_probabilities(samples, s)));
    }
    std::string cp = "changepoint,tau,probability\n";
    std::string cps = "changepoint,mean,sd,mode\n";
    if (samples.S >= 2) {
        const auto post = changepoint_posterior(samples);
        for (std::size_t m = 0; m < post.size(); ++m) {
            for (const auto& [tau, prob] : post[m].pmf) {
                cp += std::to_string(m + 1) + "," + std::to_string(tau) + "," + io::format_double(prob) + "\n";
            }
            cps += std::to_string(m + 1) + "," + io::format_double(post[m].mean) + "," + io::format_double(post[m].sd) + "," +
                   std::to_string(post[m].mode) + "\n";
        }
    }
    io::write_atomic(dir / "changepoint_posterior.csv", cp);
    io::write_atomic(dir / "changepoint_summary.csv", cps);

    // DIC needs the data; default to the inputs recorded by `fit`.
    std::string data_path = a.data;
    std::string meta_path = a.meta;
    if ((data_path.empty() || meta_path.empty()) && fs::exists(in / "manifest.json")) {
        const auto man = io::read_json(in / "manifest.json");
        if (data_path.empty()) data_path = man.at("inputs").value("data", "");
        if (meta_path.empty()) meta_path = man.at("inputs").value("meta", "");
    }
    if (!data_path.empty() && !meta_path.empty() && fs::exists(data_path) && fs::exists(meta_path)) {
        const auto cm = io::read_json(in / "chain_meta.json");
        const auto data = io::read_dataset(data_path, meta_path);
        const auto basis = make_basis(parse_basis_kind(cm.at("basis").get<std::string>()), data.time_grid(), samples.K,
                                      cm.at("degree").get<int>());
        const auto d = dic(samples, data, basis);
        io::write_json(dir / "dic.json", {{"dic", d.dic},
                                          {"mean_deviance", d.mean_deviance},
                                          {"deviance_at_estimate", d.deviance_at_estimate},
                                          {"p_d", d.p_d},
                                          {"tau_plug_in", changepoint_mode(samples).taus}});
    } else {
        log("data not found; dic.json skipped");
    }
    if (samples.records.size() >= 50) {
        io::write_json(dir / "geweke.json", geweke_json(geweke(samples)));
    } else {
        log("fewer than 50 stored iterations; geweke.json skipped");
    }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string est, truth, out;
};

std::vector<Graph> read_segment_graphs(const fs::path& dir, const std::string& prefix) {
    std::vector<Graph> out;
    for (int s = 1;; ++s) {
        const auto path = dir / (prefix + std::to_string(s) + ".csv");
        if (!fs::exists(path)) break;
        out.push_back(io::read_graph_csv(path));
    }
    return out;
}

json score_run(const fs::path& est, const fs::path& truth, std::vector<std::vector<Rates>>& acc) {
    const auto eg = read_segment_graphs(est, "func_graph_s");
    const auto tg = read_segment_graphs(truth, "truth_graph_s");
    if (eg.empty()) throw ValidationError("MissingInput", "no func_graph_s*.csv in " + est.string());
    if (tg.size() != eg.size()) {
        throw ValidationError("ShapeMismatch", "estimate and truth have different segment counts",
                              {{"estimate", std::to_string(eg.size())}, {"truth", std::to_string(tg.size())}});
    }
    json segs = json::array();
    if (acc.size() < eg.size()) acc.resize(eg.size());
    for (std::size_t s = 0; s < eg.size(); ++s) {
        const auto c = confusion(eg[s], tg[s]);
        const auto r = rates(c);
        acc[s].push_back(r);
        segs.push_back({{"segment", s + 1},
                        {"tp", c.tp},
                        {"fp", c.fp},
                        {"tn", c.tn},
                        {"fn", c.fn},
                        {"tpr", r.tpr},
                        {"fpr", r.fpr},
                        {"mcc", r.mcc},
                        {"tpr_undefined", r.tpr_undefined},
                        {"fpr_undefined", r.fpr_undefined},
                        {"mcc_undefined", r.mcc_undefined}});
    }
    return segs;
}

json mean_sd_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd ? json(*m.sd) : json(nullptr)}}; }

void run_eval(const EvalArgs& a) {
    const fs::path est(a.est), truth(a.truth);
    std::vector<std::vector<Rates>> acc;
    json report;
    if (fs::exists(est / "func_graph_s1.csv")) {
        report["runs"] = json::array({{{"name", est.filename().string()}, {"segments", score_run(est, truth, acc)}}});
    } else {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(est)) {
            if (e.is_directory() && fs::exists(e.path() / "func_graph_s1.csv")) names.push_back(e.path().filename().string());
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) throw ValidationError("MissingInput", "no estimates found under " + a.est);
        report["runs"] = json::array();
        for (const auto& n : names) report["runs"].push_back({{"name", n}, {"segments", score_run(est / n, truth / n, acc)}});
    }
    json agg = json::array();
    for (std::size_t s = 0; s < acc.size(); ++s) {
        std::vector<double> tpr, fpr, mcc;
        for (const auto& r : acc[s]) {
            tpr.push_back(r.tpr);
            fpr.push_back(r.fpr);
            mcc.push_back(r.mcc);
        }
        agg.push_back({{"segment", s + 1},
                       {"tpr", mean_sd_json(mean_sd(tpr))},
                       {"fpr", mean_sd_json(mean_sd(fpr))},
                       {"mcc", mean_sd_json(mean_sd(mcc))}});
    }
    report["aggregate"] = agg;
    const fs::path out(a.out);
    if (out.has_parent_path()) prepare_out_dir(out.parent_path().string());
    io::write_json(out, report);
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string grid, out;
};

void run_calibrate(const CalibrateArgs& a) {
    auto c = load_config(a.grid);
    CalibrationGrid g;
    io::read_grid(c, g);
    c.reject_unknown();
    log("calibrating " + std::to_string(g.p_values.size() * g.K_values.size() * g.h_values.size() *
                                        std::max(g.betas.size(), g.prior_means.size())) +
        " cells");
    const auto rows = run_grid(g);
    std::string csv = "p,K,h,alpha,beta,prior_mean,prob_coef,prob_func,se_coef,se_func\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.p) + "," + std::to_string(r.K) + "," + io::format_double(r.h) + "," + io::format_double(r.alpha) +
               "," + io::format_double(r.beta) + "," + io::format_double(r.prior_mean) + "," +
               io::format_double(r.estimate.prob_coef) + "," + io::format_double(r.estimate.prob_func) + "," +
               io::format_double(r.estimate.se_coef) + "," + io::format_double(r.estimate.se_func) + "\n";
    }
    const fs::path out(a.out);
    if (out.has_parent_path()) prepare_out_dir(out.parent_path().string());
    io::write_atomic(out, csv);
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
    std::string samples, out;
    double frac_a = 0.1, frac_b = 0.5, alpha = 0.01;
};

void run_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    const auto samples = io::read_samples(a.samples);
    auto rep = geweke_json(geweke(samples, a.frac_a, a.frac_b, a.alpha));
    if (a.frac_a != 0.1 || a.frac_b != 0.5) {
        rep["note"] = "coefficient z-scores were streamed during fit with windows 0.1/0.5";
    }
    if (a.out.empty()) {
        out << rep.dump(2) << '\n';
    } else {
        io::write_json(a.out, rep);
    }
}

// ---------------------------------------------------------------------------

struct Table1Args {
    std::string config, out;
    int replicates = 10;
    std::uint64_t seed = 1;
    std::optional<int> iters, burn_in;
};

void run_table1(const Table1Args& a) {
    Table1Options opt;
    opt.replicates = a.replicates;
    opt.seed = a.seed;
    opt.chain.total_iters = 5000;
    opt.chain.burn_in = 3000;
    opt.chain.monitor_coefficients = false;
    if (!a.config.empty()) {
        auto c = load_config(a.config);
        io::read_hyper(c, opt.hp);
        io::read_chain(c, opt.chain);
        std::string kind = to_string(opt.fit_basis);
        c.get("basis", kind);
        opt.fit_basis = parse_basis_kind(kind);
        c.get("degree", opt.fit_degree);
        c.reject_unknown();
    }
    if (a.iters) opt.chain.total_iters = *a.iters;
    if (a.burn_in) opt.chain.burn_in = *a.burn_in;
    log("reproducing the simulation table with " + std::to_string(opt.replicates) + " replicates");
    const auto rep = reproduce_table1(opt);
    json j;
    json reps = json::array();
    for (const auto& r : rep.replicates) {
        json segs = json::array();
        for (const auto& s : r.segments) segs.push_back({{"tpr", s.rates.tpr}, {"fpr", s.rates.fpr}, {"mcc", s.rates.mcc}});
        json taus = json::array();
        for (const auto& c : r.changepoints) taus.push_back({{"mean", c.mean}, {"sd", c.sd}});
        reps.push_back({{"seed", r.seed}, {"segments", segs}, {"changepoints", taus}});
    }
    j["replicates"] = reps;
    json segs = json::array();
    for (std::size_t s = 0; s < rep.segments.size(); ++s) {
        segs.push_back({{"segment", s + 1},
                        {"tpr", mean_sd_json(rep.segments[s].tpr)},
                        {"fpr", mean_sd_json(rep.segments[s].fpr)},
                        {"mcc", mean_sd_json(rep.segments[s].mcc)}});
    }
    j["segments"] = segs;
    json taus = json::array();
    for (std::size_t m = 0; m < rep.tau_mean.size(); ++m) {
        taus.push_back({{"changepoint", m + 1}, {"posterior_mean", mean_sd_json(rep.tau_mean[m])}, {"posterior_sd", mean_sd_json(rep.tau_sd[m])}});
    }
    j["changepoints"] = taus;
    json settings = io::hyper_json(opt.hp);
    settings.update(io::chain_json(opt.chain));
    settings["basis"] = to_string(opt.fit_basis);
    settings["degree"] = opt.fit_degree;
    j["manifest"] = manifest("reproduce-table1", settings, opt.seed, {{"config", a.config}}, a.out);
    const fs::path out(a.out);
    if (out.has_parent_path()) prepare_out_dir(out.parent_path().string());
    io::write_json(out, j);
}

void report_error(std::ostream& err, const std::string& code, const std::string& message, const Error::Fields& fields = {}) {
    json j;
    j["error"] = code;
    j["message"] = message;
    for (const auto& [k, v] : fields) j[k] = v;
    err << j.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic Bayesian functional graphical model toolkit"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
    c_sim->add_option("--config", sim.config, "Simulation JSON config")->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_option("--seed", sim.seed, "Override the seed");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Run the Gibbs sampler on a dataset");
    c_fit->add_option("--data", fit.data, "Long-form data CSV")->required()->check(CLI::ExistingFile);
    c_fit->add_option("--meta", fit.meta, "Metadata JSON")->required()->check(CLI::ExistingFile);
    c_fit->add_option("--config", fit.config, "Fit JSON config")->check(CLI::ExistingFile);
    c_fit->add_option("--out", fit.out, "Output directory")->required();
    c_fit->add_option("--seed", fit.seed, "Override the seed");
    c_fit->add_option("--iters", fit.iters, "Override total_iters");
    c_fit->add_option("--burn-in", fit.burn_in, "Override burn_in");
    c_fit->add_option("--thin", fit.thin, "Override thin");
    c_fit->add_option("--basis", fit.basis, "Override the basis kind (bspline or polynomial)");
    c_fit->add_option("--degree", fit.degree, "Override the basis degree");
    c_fit->add_option("--K", fit.K, "Override the basis size");

    SummarizeArgs sum;
    auto* c_sum = app.add_subcommand("summarize", "Posterior summaries of a fit");
    c_sum->add_option("--samples", sum.samples, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    c_sum->add_option("--out", sum.out, "Output directory")->required();
    c_sum->add_option("--data", sum.data, "Data CSV for DIC (default: the fit's input)");
    c_sum->add_option("--meta", sum.meta, "Metadata JSON for DIC (default: the fit's input)");
    c_sum->add_option("--threshold", sum.threshold, "Median-graph threshold")->check(CLI::Range(0.0, 1.0));

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score estimated functional graphs against the truth");
    c_eval->add_option("--est", ev.est, "Summary directory or directory of runs")->required()->check(CLI::ExistingDirectory);
    c_eval->add_option("--truth", ev.truth, "Simulation directory or directory of runs")->required()->check(CLI::ExistingDirectory);
    c_eval->add_option("--out", ev.out, "Report JSON")->required();

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate-prior", "Monte Carlo prior edge-inclusion probabilities");
    c_cal->add_option("--grid", cal.grid, "Grid JSON")->required()->check(CLI::ExistingFile);
    c_cal->add_option("--out", cal.out, "Output CSV")->required();

    DiagnoseArgs dia;
    auto* c_dia = app.add_subcommand("diagnose", "Geweke diagnostics of a fit");
    c_dia->add_option("--samples", dia.samples, "Fit output directory")->required()->check(CLI::ExistingDirectory);
    c_dia->add_option("--out", dia.out, "Output JSON (default: stdout)");
    c_dia->add_option("--frac-a", dia.frac_a, "First window fraction");
    c_dia->add_option("--frac-b", dia.frac_b, "Last window fraction");
    c_dia->add_option("--alpha", dia.alpha, "Significance level");

    Table1Args t1;
    auto* c_t1 = app.add_subcommand("reproduce-table1", "Repeat the simulation study and aggregate graph recovery");
    c_t1->add_option("--replicates", t1.replicates, "Number of synthetic datasets");
    c_t1->add_option("--seed", t1.seed, "Master seed");
    c_t1->add_option("--config", t1.config, "Fit JSON config")->check(CLI::ExistingFile);
    c_t1->add_option("--out", t1.out, "Report JSON")->required();
    c_t1->add_option("--iters", t1.iters, "Override total_iters");
    c_t1->add_option("--burn-in", t1.burn_in, "Override burn_in");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << version << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        const bool unknown = app.get_subcommands().empty() && args.size() > 1 && args[1].rfind("-", 0) != 0;
        if (unknown) {
            report_error(err, "UnknownCommand", "unknown command '" + args[1] + "'", {{"command", args[1]}});
        } else {
            report_error(err, "InvalidConfig", e.what(), {{"field", e.get_name()}, {"reason", e.what()}});
        }
        return 1;
    }

    try {
        if (c_sim->parsed()) run_simulate(sim);
        else if (c_fit->parsed()) run_fit(fit);
        else if (c_sum->parsed()) run_summarize(sum);
        else if (c_eval->parsed()) run_eval(ev);
        else if (c_cal->parsed()) run_calibrate(cal);
        else if (c_dia->parsed()) run_diagnose(dia, out);
        else if (c_t1->parsed()) run_table1(t1);
        return 0;
    } catch (const Error& e) {
        report_error(err, e.code(), e.what(), e.fields());
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        report_error(err, "IoError", e.what());
        return 1;
    } catch (const io::json::exception& e) {
        report_error(err, "InvalidConfig", e.what());
        return 1;
    }
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace dbfgm::cli
