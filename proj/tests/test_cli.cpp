#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    os << text;
}

fs::path case_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "hilange_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
    fs::path so = dir / "stdout.txt", se = dir / "stderr.txt";
    std::string cmd =
        std::string(CLI_BIN) + " " + args + " > " + so.string() + " 2> " + se.string();
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(so), slurp(se)};
}

// header + rows of an unquoted csv
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    return rows;
}

const char* quad_spectrum_config = R"json({
  "command": "spectrum",
  "model": "quad_std_1",
  "params": {"gamma": 0.05, "Gamma1": 1, "Gamma2": 0.5, "mbar": 0.3, "nbar": 1e-06},
  "grid": {"w_min": -2, "w_max": 2, "count": 401}
})json";

}  // namespace

TEST_CASE("cli rejects missing and malformed configuration") {
    fs::path dir = case_dir("reject");

    CHECK(run_cli("", dir).code == 1);
    CHECK(run_cli("--help", dir).code == 0);

    auto missing = run_cli("--config " + (dir / "absent.json").string(), dir);
    CHECK(missing.code == 1);
    CHECK_THAT(missing.err, ContainsSubstring("cannot read config"));

    write_text(dir / "broken.json", "{\"command\": ");
    auto broken = run_cli("--config " + (dir / "broken.json").string(), dir);
    CHECK(broken.code == 1);
    CHECK_THAT(broken.err, ContainsSubstring("config:"));

    write_text(dir / "extra.json", R"({"command": "verify", "bogus": 1})");
    auto extra = run_cli("--config " + (dir / "extra.json").string(), dir);
    CHECK(extra.code == 1);
    CHECK_THAT(extra.err, ContainsSubstring("unknown key 'bogus'"));

    write_text(dir / "cmd.json", R"({"command": "simulate"})");
    auto cmd = run_cli("--config " + (dir / "cmd.json").string(), dir);
    CHECK(cmd.code == 1);
    CHECK_THAT(cmd.err, ContainsSubstring("config.command"));

    write_text(dir / "rate.json",
               R"({"command": "spectrum", "model": "quad_std_1", "params": {"Gamma1": -2}})");
    auto rate = run_cli("--config " + (dir / "rate.json").string(), dir);
    CHECK(rate.code == 1);
    CHECK_THAT(rate.err, ContainsSubstring("config.params.Gamma1"));
    CHECK_THAT(rate.err, ContainsSubstring("must be nonnegative"));

    write_text(dir / "ok.json", quad_spectrum_config);
    auto tol = run_cli("--config " + (dir / "ok.json").string() + " --tolerance nokey", dir);
    CHECK(tol.code == 1);
    CHECK_THAT(tol.err, ContainsSubstring("KEY=VALUE"));
}

TEST_CASE("spectrum run emits csv plus metadata and reruns byte for byte") {
    fs::path dir = case_dir("spectrum");
    write_text(dir / "run.json", quad_spectrum_config);

    auto first = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "a").string(), dir);
    REQUIRE(first.code == 0);
    CHECK_THAT(first.out, ContainsSubstring("stability margin"));

    auto spectrum = read_csv(dir / "a" / "spectrum.csv");
    REQUIRE(spectrum.size() == 402);
    CHECK(spectrum[0] == std::vector<std::string>{"omega_rad_s", "a", "d", "dd", "m"});
    auto ports = read_csv(dir / "a" / "ports.csv");
    REQUIRE(ports.size() == 402);
    CHECK(ports[0] == std::vector<std::string>{"omega_rad_s", "a", "d", "dd"});

    std::string meta = slurp(dir / "a" / "metadata.json");
    CHECK_THAT(meta, ContainsSubstring("\"stable\": true"));
    CHECK_THAT(meta, ContainsSubstring("params_hash"));

    auto second = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "b").string(), dir);
    REQUIRE(second.code == 0);
    for (const char* name : {"spectrum.csv", "ports.csv", "metadata.json"})
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
}

TEST_CASE("zero-rate channels pass input densities through unchanged") {
    fs::path dir = case_dir("passthrough");
    write_text(dir / "run.json", R"json({
      "command": "spectrum",
      "model": "om_std_1a",
      "params": {"kappa": 0, "Gamma_m": 0, "g0": 0, "nbar": 1,
                 "Delta": 0.333333333333, "Omega": 0.666666666666},
      "grid": {"w_min": -1, "w_max": 1, "count": 101}
    })json");

    auto r = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "out").string(), dir);
    REQUIRE(r.code == 0);
    auto ports = read_csv(dir / "out" / "ports.csv");
    REQUIRE(ports.size() == 102);
    for (size_t i = 1; i < ports.size(); ++i)
        for (size_t c = 1; c < ports[i].size(); ++c) CHECK(ports[i][c] == "1");
}

TEST_CASE("weak red pump shows resolved peaks by both mechanical resonances") {
    fs::path dir = case_dir("sidebands");
    write_text(dir / "run.json", R"json({
      "command": "spectrum",
      "model": "om_std_2",
      "params": {"g0": 0.1, "kappa": 0.3, "Gamma_m": 0.01, "nbar": 0.02, "mbar": 2.0,
                 "alpha": 1.2, "Delta": -0.1, "Omega": 1},
      "grid": {"w_min": -1.5, "w_max": 1.5, "count": 1501},
      "noise": {"book": {"mech": {"kind": "thermal", "occupation": 2.0}},
                "bindings": {"a": "vac", "a2": "vac", "b": "mech"}}
    })json");

    auto r = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "out").string(), dir);
    REQUIRE(r.code == 0);

    auto ports = read_csv(dir / "out" / "ports.csv");
    REQUIRE(ports.size() == 1502);
    size_t col = 1;  // port a
    REQUIRE(ports[0][col] == "a");
    std::vector<double> w(ports.size() - 1), s(ports.size() - 1);
    for (size_t i = 1; i < ports.size(); ++i) {
        w[i - 1] = std::stod(ports[i][0]);
        s[i - 1] = std::stod(ports[i][col]);
    }
    auto peak_in = [&](double lo, double hi) {
        size_t best = 0;
        double vmax = -1;
        for (size_t i = 1; i + 1 < w.size(); ++i)
            if (w[i] >= lo && w[i] <= hi && s[i] > vmax) {
                vmax = s[i];
                best = i;
            }
        REQUIRE(vmax > 0);
        // interior local maximum, not a window-edge artifact
        CHECK(s[best] > s[best - 1]);
        CHECK(s[best] > s[best + 1]);
        return vmax;
    };
    double center = s[w.size() / 2];
    double lower = peak_in(-1.3, -0.9);
    double upper = peak_in(0.9, 1.3);
    CHECK(lower > 3 * center);
    CHECK(upper > 1.3 * center);
    CHECK(lower > upper);
}

TEST_CASE("timeseries run reproduces bytes and tightens with chain order") {
    fs::path dir = case_dir("timeseries");
    write_text(dir / "run.json", R"json({
      "command": "timeseries",
      "model": "diode(4)",
      "params": {"kappa": 1, "mu": 1, "tau": 1},
      "run": {"dt": 0.0001, "horizon": 0.05, "trajectories": 2, "seed": 42,
              "drive_port": "v",
              "drive": {"V0": 1, "alpha": 1000, "omega": 6283.185307179586}},
      "orders": [2, 3, 4]
    })json");

    auto first = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "a").string(), dir);
    REQUIRE(first.code == 0);
    auto second = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "b").string(), dir);
    REQUIRE(second.code == 0);
    for (const char* name : {"timeseries.csv", "convergence.csv", "metadata.json"})
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));

    auto series = read_csv(dir / "a" / "timeseries.csv");
    REQUIRE(series.size() == 502);
    CHECK(series[0][0] == "t_s");
    CHECK(series[0][1] == "u_mean_re");

    auto conv = read_csv(dir / "a" / "convergence.csv");
    REQUIRE(conv.size() == 4);
    CHECK(conv[0] == std::vector<std::string>{"order", "max_error"});
    std::vector<double> err;
    for (size_t i = 1; i < conv.size(); ++i) err.push_back(std::stod(conv[i][1]));
    // plateau ties at the shared-step discretization floor are allowed
    for (size_t i = 1; i < err.size(); ++i) CHECK(err[i] <= err[i - 1] * 1.05);

    auto reseeded = run_cli(
        "--config " + (dir / "run.json").string() + " --out " + (dir / "c").string() + " --seed 43", dir);
    REQUIRE(reseeded.code == 0);
    CHECK(slurp(dir / "a" / "timeseries.csv") != slurp(dir / "c" / "timeseries.csv"));
    CHECK(slurp(dir / "a" / "convergence.csv") == slurp(dir / "c" / "convergence.csv"));
}

TEST_CASE("timeseries blow-up exits with the failing step named") {
    fs::path dir = case_dir("blowup");
    write_text(dir / "run.json", R"json({
      "command": "timeseries",
      "model": "diode(2)",
      "params": {"kappa": 0, "mu": -1, "tau": 1},
      "run": {"dt": 0.1, "horizon": 1000, "trajectories": 1, "seed": 3,
              "drive_port": "v",
              "drive": {"V0": 1, "alpha": 1000, "omega": 6283.185307179586}}
    })json");

    auto r = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.code == 1);
    CHECK_THAT(r.err, ContainsSubstring("diverged at step"));
}

TEST_CASE("stability tolerance override trips the warning exit") {
    fs::path dir = case_dir("tolerance");
    write_text(dir / "run.json", quad_spectrum_config);

    auto r = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "out").string() +
                         " --tolerance stability=1e-14",
                     dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.out, ContainsSubstring("warning"));
    CHECK(fs::exists(dir / "out" / "spectrum.csv"));
    CHECK_THAT(slurp(dir / "out" / "metadata.json"), ContainsSubstring("\"stable\": false"));
}

TEST_CASE("verify run reports a clean engine and writes both report formats") {
    fs::path dir = case_dir("verify");
    write_text(dir / "run.json", R"({"command": "verify"})");

    auto r = run_cli("--config " + (dir / "run.json").string() + " --out " + (dir / "out").string(), dir);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("0 fail"));

    std::string doc = slurp(dir / "out" / "verify.json");
    CHECK_THAT(doc, ContainsSubstring("\"failures\": 0"));
    CHECK_THAT(doc, ContainsSubstring("\"deviations\": 17"));

    auto csv = read_csv(dir / "out" / "verify.csv");
    REQUIRE(csv.size() > 1);
    CHECK(csv[0][0] == "group");
    for (size_t i = 1; i < csv.size(); ++i) CHECK(csv[i][2] != "fail");
}
