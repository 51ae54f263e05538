#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"

using namespace rotgyro;
using namespace rotgyro::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    json summary;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "rotgyro");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    Run r;
    r.code = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    r.err = err.str();
    try {
        r.summary = json::parse(out.str());
    } catch (const json::exception&) {
    }
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = {}) const { return (sub.empty() ? path : path / sub).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("defaults carry the protocol parameters") {
    const json d = default_config();
    CHECK(d["model"]["anisotropy"] == 0.03);
    CHECK(d["stage"]["omega_start"] == 0.4);
    CHECK(d["stage"]["delta_omega"] == 0.01);
    CHECK(d["stage"]["p01"] == 0.01);
    CHECK(d["stage"]["gamma_max"] == 0.0005);
    const json merged = merge_config(json::object());
    const ModelParams p = model_params(merged);
    CHECK(p.spec.n_particles == 12);
    CHECK(p.spec.l_max == 16);
    CHECK(p.spec.n_ll_max == 2);
    CHECK(p.reduced_coupling() == doctest::Approx(1.0));
    const ProtocolConfig pc = protocol_config(merged);
    CHECK(pc.gamma_max == 0.0005);
    CHECK(pc.omega_start == 0.4);
    CHECK(pc.sudden == SuddenMode::ramped);
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(merge_config(json{{"model", {{"particles", 4}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"modle", json::object()}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"model", {{"n_particles", "four"}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"model", {{"anisotropy_convention", "circular"}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"stage", {{"sudden", "gradual"}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"qfi", {{"taus", {1.0, "x"}}}}}), ConfigError);
    CHECK_THROWS_AS(merge_config(json{{"model", {{"n_particles", 0}}}}), ConfigError);
    CHECK_NOTHROW(merge_config(json{{"model", {{"l_max", 10}, {"g", 0.5}}}}));
    CHECK(model_params(merge_config(json{{"model", {{"l_max", 10}}}})).spec.l_max == 10);
}

TEST_CASE("overrides") {
    json user = json::object();
    apply_override(user, "model.n_particles=4");
    apply_override(user, "stage.omega_ext.values=[-0.001,0,0.001]");
    apply_override(user, "stage.sudden=instantaneous");
    apply_override(user, "output.directory=\"some dir\"");
    CHECK(user["model"]["n_particles"] == 4);
    CHECK(user["stage"]["omega_ext"]["values"].size() == 3);
    CHECK(user["stage"]["sudden"] == "instantaneous");
    CHECK(user["output"]["directory"] == "some dir");
    const json merged = merge_config(user);
    CHECK(omega_ext_grid(merged) == std::vector<double>{-0.001, 0.0, 0.001});
    CHECK_THROWS_AS(apply_override(user, "no_equals_sign"), ConfigError);
}

TEST_CASE("config hash") {
    const json a = merge_config(json::object());
    CHECK(config_hash(a) == config_hash(merge_config(json::object())));
    CHECK(config_hash(a) != config_hash(merge_config(json{{"model", {{"n_particles", 10}}}})));
    // where results go and whether they are cached does not change what is computed
    CHECK(config_hash(a) == config_hash(merge_config(json{{"output", {{"directory", "elsewhere"}}}})));
    CHECK(config_hash(a) == config_hash(merge_config(json{{"cache", {{"enabled", false}}}})));
    // 0 and 0.0 mean the same thing
    CHECK(config_hash(merge_config(json{{"model", {{"anisotropy", 0}}}})) ==
          config_hash(merge_config(json{{"model", {{"anisotropy", 0.0}}}})));
}

TEST_CASE("config files") {
    TempDir dir("rotgyro_cli_files");
    const auto file = dir.path / "run.json";
    std::ofstream(file) << "{ // comment\n \"model\": {\"n_particles\": 2} }";
    CHECK(read_config_file(file)["model"]["n_particles"] == 2);
    std::ofstream(file) << "{ \"model\": ";
    CHECK_THROWS_AS(read_config_file(file), ConfigError);
    CHECK_THROWS_AS(read_config_file(dir.path / "missing.json"), ConfigError);
}

TEST_CASE("command-line errors exit with status 2") {
    TempDir dir("rotgyro_cli_errors");
    CHECK(run({}).code == 2);
    CHECK(run({"transmogrify"}).code == 2);
    const Run r = run({"spectrum", "-q", "-o", dir.str(), "--set", "model.bogus=1"});
    CHECK(r.code == 2);
    CHECK(r.summary["status"] == "error");
    CHECK(r.summary["error"]["kind"] == "config");
}

TEST_CASE("numerical failures exit with status 3 and name the stage") {
    TempDir dir("rotgyro_cli_numerical");
    const Run r = run({"ground-state", "-q", "--no-cache", "-o", dir.str(), "--set", "model.n_particles=4",
                       "stage.critical_lo=0.5", "stage.critical_hi=0.6"});
    CHECK(r.code == 3);
    CHECK(r.summary["error"]["kind"] == "numerical");
    CHECK(r.summary["error"]["stage"] == "critical");
    CHECK(fs::exists(dir.path / "ground-state.summary.json"));
}

TEST_CASE("spectrum of one isotropic particle") {
    TempDir dir("rotgyro_cli_spectrum");
    const Run r = run({"spectrum", "-q", "--no-cache", "-o", dir.str(), "--set", "model.n_particles=1",
                       "model.anisotropy=0", "spectrum.points=11", "spectrum.levels=4"});
    REQUIRE(r.code == 0);
    CHECK(r.summary["status"] == "ok");
    CHECK(r.summary["versions"].contains("eigen"));
    CHECK(r.summary["config_hash"].is_string());
    std::string header;
    const auto rows = read_csv(dir.path / "spectrum.csv", &header);
    CHECK(header == "omega,E_0,E_1,E_2,E_3");
    REQUIRE(rows.size() == 11);
    // even m only, n + (|m| − m)/2 ≤ 1, m ≤ 5
    const std::vector<std::pair<int, int>> orbitals{{0, 0}, {0, 2}, {0, 4}, {1, 0}, {1, 2}, {1, 4}};
    for (const auto& row : rows) {
        const double w = row[0];
        std::vector<double> e;
        for (auto [n, m] : orbitals) e.push_back(2.0 * n + m + 1.0 - w * m);
        std::sort(e.begin(), e.end());
        for (int i = 0; i < 4; ++i) CHECK(row[static_cast<std::size_t>(i + 1)] == doctest::Approx(e[static_cast<std::size_t>(i)]).epsilon(1e-11));
    }
    const json file = json::parse(slurp(dir.path / "spectrum.summary.json"));
    CHECK(file["config_hash"] == r.summary["config_hash"]);
}

TEST_CASE("cached and uncached runs write identical CSVs") {
    TempDir dir("rotgyro_cli_cache");
    const std::vector<std::string> common{"-q", "--set", "model.n_particles=4", "spectrum.points=6",
                                          "cache.path=\"" + dir.str("cache") + "\""};
    auto with = [&](std::vector<std::string> extra, const std::string& out) {
        std::vector<std::string> a{"spectrum", "-o", dir.str(out)};
        a.insert(a.end(), common.begin(), common.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    };
    REQUIRE(with({}, "cold").code == 0);
    REQUIRE(with({}, "warm").code == 0);
    REQUIRE(with({"--no-cache"}, "none").code == 0);
    CHECK(fs::exists(dir.path / "cache" / "v1"));
    const std::string cold = slurp(dir.path / "cold" / "spectrum.csv");
    CHECK_FALSE(cold.empty());
    CHECK(cold == slurp(dir.path / "warm" / "spectrum.csv"));
    CHECK(cold == slurp(dir.path / "none" / "spectrum.csv"));
}

TEST_CASE("a run is reproducible from its summary") {
    TempDir dir("rotgyro_cli_replay");
    const Run first = run({"spectrum", "-q", "--no-cache", "-o", dir.str("a"), "--set", "model.n_particles=2",
                           "spectrum.points=5"});
    REQUIRE(first.code == 0);
    const auto cfg = dir.path / "replay.json";
    std::ofstream(cfg) << first.summary["config"].dump();
    const Run second = run({"spectrum", "-q", "--no-cache", "-c", cfg.string(), "-o", dir.str("b")});
    REQUIRE(second.code == 0);
    CHECK(second.summary["config_hash"] == first.summary["config_hash"]);
    CHECK(slurp(dir.path / "a" / "spectrum.csv") == slurp(dir.path / "b" / "spectrum.csv"));
}

TEST_CASE("ground-state report for four particles") {
    TempDir dir("rotgyro_cli_ground");
    const Run r = run({"ground-state", "-q", "--no-cache", "-o", dir.str(), "--set", "model.n_particles=4",
                       "stage.critical_hi=0.9"});
    REQUIRE(r.code == 0);
    const json& res = r.summary["results"];
    CHECK(res["omega_c"].get<double>() > 0.78);
    CHECK(res["omega_c"].get<double>() < 0.9);
    const double f = res["fidelity"].get<double>();
    CHECK(f > 0.0);
    CHECK(f <= 1.0);
    double total = 0.0;
    for (const auto& p : res["p_n"]) total += p.get<double>();
    CHECK(total == doctest::Approx(f).epsilon(1e-10));
    CHECK(fs::exists(dir.path / "two_mode_pn.csv"));
    CHECK(fs::exists(dir.path / "natural_orbitals.csv"));
}

TEST_CASE("ramp-plan, protocol, qfi and convergence on small systems") {
    TempDir dir("rotgyro_cli_small");
    const std::vector<std::string> base{"-q", "--no-cache", "--set", "model.n_particles=4", "stage.critical_hi=0.9"};
    auto go = [&](const std::string& sub, std::vector<std::string> extra) {
        std::vector<std::string> a{sub, "-o", dir.str(sub)};
        a.insert(a.end(), base.begin(), base.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    };
    SUBCASE("ramp-plan") {
        const Run r = go("ramp-plan", {"ramp.g_n_over_6_sweep=[0.8,1.0]"});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir.path / "ramp-plan" / "ramp_plan.csv"));
        CHECK(fs::exists(dir.path / "ramp-plan" / "ramp_gaps.csv"));
        CHECK(fs::exists(dir.path / "ramp-plan" / "ramp_sweep.csv"));
    }
    SUBCASE("protocol") {
        const Run r = go("protocol", {"stage.tau=2", "stage.omega_ext.points=5", "stage.omega_ext.min=-0.001",
                                      "stage.omega_ext.max=0.001"});
        REQUIRE(r.code == 0);
        std::string header;
        const auto rows = read_csv(dir.path / "protocol" / "precision_binomial.csv", &header);
        CHECK(header == "omega_ext,estimator_mean,estimator_derivative,delta_omega_scaled,shot_noise,divergence_flag");
        CHECK(rows.size() == 5);
        CHECK(fs::exists(dir.path / "protocol" / "precision_l_moment.csv"));
        CHECK(fs::exists(dir.path / "protocol" / "protocol_points.csv"));
    }
    SUBCASE("qfi") {
        const Run r = go("qfi", {"qfi.taus=[0.25,0.5]", "stage.omega_ext.points=3", "stage.omega_ext.min=-0.0002",
                                 "stage.omega_ext.max=0.0002"});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir.path / "qfi" / "qfi_tau.csv"));
        CHECK(fs::exists(dir.path / "qfi" / "qfi_omega.csv"));
    }
    SUBCASE("convergence") {
        const Run r = go("convergence", {"convergence.omega=0.8", "convergence.l_max_extra=[0,2]"});
        REQUIRE(r.code == 0);
        CHECK(read_csv(dir.path / "convergence" / "convergence.csv").size() == 4);
    }
}

TEST_CASE("selftest passes") {
    TempDir dir("rotgyro_cli_selftest");
    const Run r = run({"selftest", "-q", "--no-cache", "-o", dir.str()});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path / "selftest.csv"));
}
