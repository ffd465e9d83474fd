#include <catch_amalgamated.hpp>

#include "cli.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "dbfgm");
    std::ostringstream out, err;
    const int code = dbfgm::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("dbfgm_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string small_sim = R"({"n": 12, "p": 4, "T": 40, "K": 3, "taus": [21], "edge_prob": 0.5, "seed": 5})";
const std::string small_fit = R"({"K": 3, "S": 2, "total_iters": 200, "burn_in": 100, "seed": 2})";

}  // namespace

TEST_CASE("simulate, fit, summarize and eval run end to end", "[cli]") {
    const auto dir = scratch("pipeline");
    write_text(dir / "sim.json", small_sim);
    write_text(dir / "fit.json", small_fit);
    const auto sim = (dir / "sim").string();
    const auto fit = (dir / "fit").string();
    const auto sum = (dir / "sum").string();
    REQUIRE(run({"simulate", "--config", (dir / "sim.json").string(), "--out", sim}).code == 0);
    REQUIRE(run({"fit", "--data", sim + "/data.csv", "--meta", sim + "/meta.json", "--config", (dir / "fit.json").string(),
                 "--out", fit})
                .code == 0);
    REQUIRE(run({"summarize", "--samples", fit, "--out", sum}).code == 0);
    REQUIRE(run({"eval", "--est", sum, "--truth", sim, "--out", (dir / "report.json").string()}).code == 0);

    const auto report = read_json(dir / "report.json");
    const auto& segs = report.at("runs").at(0).at("segments");
    REQUIRE(segs.size() == 2);
    for (const auto& s : segs) {
        REQUIRE(s.at("tp").get<long>() + s.at("fp").get<long>() + s.at("tn").get<long>() + s.at("fn").get<long>() == 6);
        REQUIRE(s.contains("mcc"));
    }
    for (const auto& d : {sim, fit}) {
        REQUIRE(fs::exists(fs::path(d) / "manifest.json"));
        REQUIRE(fs::exists(fs::path(d) / "timings.json"));
    }
    REQUIRE(fs::exists(fs::path(sum) / "dic.json"));

    const auto diag = run({"diagnose", "--samples", fit});
    REQUIRE(diag.code == 0);
    REQUIRE(json::parse(diag.out).contains("scalars"));
}

TEST_CASE("A missing required flag exits 1 with InvalidConfig", "[cli]") {
    const auto r = run({"simulate"});
    REQUIRE(r.code == 1);
    REQUIRE(json::parse(r.err).at("error") == "InvalidConfig");
}

TEST_CASE("An unknown command exits 1 with UnknownCommand", "[cli]") {
    const auto r = run({"frobnicate"});
    REQUIRE(r.code == 1);
    REQUIRE(json::parse(r.err).at("error") == "UnknownCommand");
}

TEST_CASE("Unknown config keys are rejected with the field name", "[cli]") {
    const auto dir = scratch("unknown_key");
    write_text(dir / "sim.json", R"({"n": 5, "noise": 0.1})");
    const auto r = run({"simulate", "--config", (dir / "sim.json").string(), "--out", (dir / "out").string()});
    REQUIRE(r.code == 1);
    const auto e = json::parse(r.err);
    REQUIRE(e.at("error") == "InvalidConfig");
    REQUIRE(e.at("field") == "noise");
}

TEST_CASE("Fitting a dataset containing NaN exits 1 with NonFiniteValue", "[cli]") {
    const auto dir = scratch("nan");
    write_text(dir / "meta.json", R"({"n": 1, "p": 2, "T": 3})");
    write_text(dir / "data.csv",
               "replicate,function,time_index,value\n1,1,1,0.5\n1,1,2,0.1\n1,1,3,0.2\n1,2,1,0.3\n1,2,2,nan\n1,2,3,0.4\n");
    const auto r = run({"fit", "--data", (dir / "data.csv").string(), "--meta", (dir / "meta.json").string(), "--out",
                        (dir / "fit").string()});
    REQUIRE(r.code == 1);
    const auto e = json::parse(r.err);
    REQUIRE(e.at("error") == "NonFiniteValue");
    REQUIRE(e.at("j") == "2");
    REQUIRE(e.at("t") == "2");
}

TEST_CASE("Same command, config and seed give byte-identical outputs", "[cli][property]") {
    const auto dir = scratch("determinism");
    write_text(dir / "sim.json", small_sim);
    write_text(dir / "fit.json", small_fit);
    auto outputs = [&] {
        const auto sim = (dir / "sim").string();
        const auto fit = (dir / "fit").string();
        fs::remove_all(sim);
        fs::remove_all(fit);
        REQUIRE(run({"simulate", "--config", (dir / "sim.json").string(), "--out", sim}).code == 0);
        REQUIRE(run({"fit", "--data", sim + "/data.csv", "--meta", sim + "/meta.json", "--config",
                     (dir / "fit.json").string(), "--out", fit})
                    .code == 0);
        std::map<std::string, std::string> files;
        for (const auto& d : {sim, fit}) {
            for (const auto& e : fs::directory_iterator(d)) {
                if (e.path().filename() != "timings.json") files[e.path().string()] = slurp(e.path());
            }
        }
        return files;
    };
    const auto a = outputs();
    const auto b = outputs();
    REQUIRE(a.size() > 5);
    REQUIRE(a == b);
}

TEST_CASE("The SST-like configuration round-trips through CSV ingestion", "[cli]") {
    const auto dir = scratch("sst_like");
    const fs::path config = fs::path(DBFGM_CONFIG_DIR) / "sst_like.json";
    const auto sim = (dir / "sim").string();
    REQUIRE(run({"simulate", "--config", config.string(), "--out", sim}).code == 0);
    const auto meta = read_json(fs::path(sim) / "meta.json");
    REQUIRE(meta.at("n") == 43);
    REQUIRE(meta.at("p") == 16);
    REQUIRE(meta.at("T") == 365);
    const auto r = run({"fit", "--data", sim + "/data.csv", "--meta", sim + "/meta.json", "--out", (dir / "fit").string(),
                        "--iters", "30", "--burn-in", "10"});
    REQUIRE(r.code == 0);
    const auto chain = read_json(dir / "fit" / "chain_meta.json");
    REQUIRE(chain.at("n") == 43);
    REQUIRE(chain.at("records") == 20);
}

TEST_CASE("Fit flags override the basis settings of the config", "[cli]") {
    const auto dir = scratch("basis_flags");
    write_text(dir / "sim.json", small_sim);
    write_text(dir / "fit.json", small_fit);
    const auto sim = (dir / "sim").string();
    REQUIRE(run({"simulate", "--config", (dir / "sim.json").string(), "--out", sim}).code == 0);
    const std::vector<std::string> base = {"fit", "--data", sim + "/data.csv", "--meta", sim + "/meta.json", "--config",
                                           (dir / "fit.json").string(), "--iters", "20", "--burn-in", "10"};
    auto with = [&](std::vector<std::string> extra, const std::string& out) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        args.insert(args.end(), {"--out", (dir / out).string()});
        return run(args);
    };
    REQUIRE(with({"--basis", "polynomial", "--degree", "3", "--K", "2"}, "poly").code == 0);
    const auto meta = read_json(dir / "poly" / "chain_meta.json");
    REQUIRE(meta.at("basis") == "polynomial");
    REQUIRE(meta.at("K") == 2);

    const auto bad = with({"--basis", "fourier"}, "bad");
    REQUIRE(bad.code == 1);
    REQUIRE(json::parse(bad.err).at("error") == "InvalidConfig");
}
