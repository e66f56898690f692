#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hilange/analysis.hpp"
#include "hilange/golden.hpp"
#include "hilange/models.hpp"
#include "hilange/spectral.hpp"
#include "hilange/timedomain.hpp"

using namespace hilange;
using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) config_fail(path, "unknown key '" + it.key() + "'");
}

const json& need(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) config_fail(path, "missing key '" + std::string(key) + "'");
    return j.at(key);
}

double take_num(const json& j, const std::string& path) {
    if (!j.is_number()) config_fail(path, "expected a number");
    return j.get<double>();
}

std::string take_str(const json& j, const std::string& path) {
    if (!j.is_string()) config_fail(path, "expected a string");
    return j.get<std::string>();
}

bool take_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) config_fail(path, "expected a boolean");
    return j.get<bool>();
}

long long take_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) config_fail(path, "expected an integer");
    return j.get<long long>();
}

Rat take_rat(const json& j, const std::string& path) {
    double v = take_num(j, path);
    try {
        return rat_from_double(v);
    } catch (const std::exception& e) {
        config_fail(path, e.what());
    }
}

// number, or [re, im]
Coeff take_coeff(const json& j, const std::string& path) {
    if (j.is_array()) {
        if (j.size() != 2) config_fail(path, "expected [re, im]");
        return Coeff(take_rat(j[0], path + "[0]"), take_rat(j[1], path + "[1]"));
    }
    return Coeff(take_rat(j, path));
}

ModelParams parse_params(const json& j, const std::string& path) {
    if (!j.is_object()) config_fail(path, "expected an object");
    static const std::set<std::string> allowed{
        "gamma",      "g0",   "g",       "zeta",        "chi",
        "Delta",      "Omega", "omega",  "kappa",       "Gamma_m",
        "Gamma1",     "Gamma2", "nbar",  "mbar",        "alpha",
        "Cbar",       "Sbar",  "order",  "include_self_energy", "ultracold",
        "engine_number_sign", "sign_a", "sign_b", "diode_order", "mu",
        "tau",        "vbar"};
    reject_unknown(j, path, allowed);
    ModelParams p;
    auto rat = [&](const char* k, Rat& dst) {
        if (j.contains(k)) dst = take_rat(j.at(k), path + "." + k);
    };
    rat("gamma", p.gamma);
    rat("g0", p.g0);
    rat("zeta", p.zeta);
    rat("chi", p.chi);
    rat("Delta", p.Delta);
    rat("Omega", p.Omega);
    rat("omega", p.omega);
    rat("kappa", p.kappa);
    rat("Gamma_m", p.Gamma_m);
    rat("Gamma1", p.Gamma1);
    rat("Gamma2", p.Gamma2);
    rat("nbar", p.nbar);
    rat("mbar", p.mbar);
    rat("Cbar", p.Cbar);
    rat("Sbar", p.Sbar);
    rat("mu", p.mu);
    rat("tau", p.tau);
    rat("vbar", p.vbar);
    if (j.contains("g")) p.g = take_coeff(j.at("g"), path + ".g");
    if (j.contains("alpha")) p.alpha = take_coeff(j.at("alpha"), path + ".alpha");
    if (j.contains("order")) p.order = int(take_int(j.at("order"), path + ".order"));
    if (j.contains("sign_a")) p.sign_a = int(take_int(j.at("sign_a"), path + ".sign_a"));
    if (j.contains("sign_b")) p.sign_b = int(take_int(j.at("sign_b"), path + ".sign_b"));
    if (j.contains("diode_order")) {
        long long n = take_int(j.at("diode_order"), path + ".diode_order");
        if (n < 1) config_fail(path + ".diode_order", "expected a positive integer");
        p.diode_order = size_t(n);
    }
    if (j.contains("include_self_energy"))
        p.include_self_energy = take_bool(j.at("include_self_energy"), path + ".include_self_energy");
    if (j.contains("ultracold")) p.ultracold = take_bool(j.at("ultracold"), path + ".ultracold");
    if (j.contains("engine_number_sign"))
        p.engine_number_sign = take_bool(j.at("engine_number_sign"), path + ".engine_number_sign");
    // decay rates and bath occupations; detunings stay signed
    const std::pair<const char*, const Rat*> rates[] = {
        {"gamma", &p.gamma},   {"chi", &p.chi},       {"kappa", &p.kappa},
        {"Gamma_m", &p.Gamma_m}, {"Gamma1", &p.Gamma1}, {"Gamma2", &p.Gamma2},
        {"nbar", &p.nbar},     {"mbar", &p.mbar}};
    for (const auto& [name, value] : rates)
        if (*value < 0) config_fail(path + "." + name, "must be nonnegative");
    return p;
}

FrequencyGrid parse_grid(const json& j, const std::string& path) {
    if (!j.is_object()) config_fail(path, "expected an object");
    reject_unknown(j, path, {"w_min", "w_max", "count"});
    FrequencyGrid g;
    if (j.contains("w_min")) g.w_min = take_num(j.at("w_min"), path + ".w_min");
    if (j.contains("w_max")) g.w_max = take_num(j.at("w_max"), path + ".w_max");
    if (j.contains("count")) {
        long long c = take_int(j.at("count"), path + ".count");
        if (c < 2) config_fail(path + ".count", "expected at least 2 points");
        g.count = size_t(c);
    }
    try {
        g.validate();
    } catch (const std::exception& e) {
        config_fail(path, e.what());
    }
    return g;
}

NoiseModel parse_noise_model(const json& j, const std::string& path) {
    if (!j.is_object()) config_fail(path, "expected an object");
    std::string kind = take_str(need(j, path, "kind"), path + ".kind");
    try {
        if (kind == "vacuum") {
            reject_unknown(j, path, {"kind"});
            return NoiseModel::vacuum();
        }
        if (kind == "thermal") {
            reject_unknown(j, path, {"kind", "occupation"});
            return NoiseModel::thermal(take_num(need(j, path, "occupation"), path + ".occupation"));
        }
        if (kind == "coherent_gaussian") {
            reject_unknown(j, path, {"kind", "chi", "carrier", "amplitude"});
            double amp = j.contains("amplitude") ? take_num(j.at("amplitude"), path + ".amplitude") : 1.0;
            return NoiseModel::coherent_gaussian(take_num(need(j, path, "chi"), path + ".chi"),
                                                 take_num(need(j, path, "carrier"), path + ".carrier"),
                                                 amp);
        }
        if (kind == "squared") {
            reject_unknown(j, path, {"kind", "base", "scale"});
            return NoiseModel::squared(take_str(need(j, path, "base"), path + ".base"),
                                       take_num(need(j, path, "scale"), path + ".scale"));
        }
        if (kind == "product") {
            reject_unknown(j, path, {"kind", "left", "right"});
            return NoiseModel::product(take_str(need(j, path, "left"), path + ".left"),
                                       take_str(need(j, path, "right"), path + ".right"));
        }
    } catch (const std::invalid_argument& e) {
        config_fail(path, e.what());
    }
    config_fail(path + ".kind", "unknown noise kind '" + kind + "'");
}

SdeRun parse_run(const json& j, const std::string& path) {
    if (!j.is_object()) config_fail(path, "expected an object");
    reject_unknown(j, path,
                   {"dt", "horizon", "trajectories", "seed", "noise_scale", "drive_port", "drive",
                    "initial"});
    SdeRun run;
    if (j.contains("dt")) run.dt = take_num(j.at("dt"), path + ".dt");
    if (j.contains("horizon")) run.horizon = take_num(j.at("horizon"), path + ".horizon");
    if (j.contains("trajectories")) {
        long long n = take_int(j.at("trajectories"), path + ".trajectories");
        if (n < 1) config_fail(path + ".trajectories", "expected a positive integer");
        run.trajectories = size_t(n);
    }
    if (j.contains("seed")) {
        long long s = take_int(j.at("seed"), path + ".seed");
        if (s < 0) config_fail(path + ".seed", "expected a nonnegative integer");
        run.seed = uint64_t(s);
    }
    if (j.contains("noise_scale")) {
        const json& ns = j.at("noise_scale");
        if (!ns.is_object()) config_fail(path + ".noise_scale", "expected an object");
        for (auto it = ns.begin(); it != ns.end(); ++it)
            run.noise_scale[it.key()] = take_num(it.value(), path + ".noise_scale." + it.key());
    }
    if (j.contains("drive_port")) run.drive_port = take_str(j.at("drive_port"), path + ".drive_port");
    if (j.contains("drive")) {
        const json& d = j.at("drive");
        if (!d.is_object()) config_fail(path + ".drive", "expected an object");
        reject_unknown(d, path + ".drive", {"V0", "alpha", "omega"});
        if (d.contains("V0")) run.drive.V0 = take_num(d.at("V0"), path + ".drive.V0");
        if (d.contains("alpha")) run.drive.alpha = take_num(d.at("alpha"), path + ".drive.alpha");
        if (d.contains("omega")) run.drive.omega = take_num(d.at("omega"), path + ".drive.omega");
    }
    if (j.contains("initial")) {
        const json& init = j.at("initial");
        if (!init.is_array()) config_fail(path + ".initial", "expected an array");
        for (size_t i = 0; i < init.size(); ++i) {
            const json& e = init[i];
            std::string ep = path + ".initial[" + std::to_string(i) + "]";
            if (e.is_array()) {
                if (e.size() != 2) config_fail(ep, "expected [re, im]");
                run.initial.emplace_back(take_num(e[0], ep + "[0]"), take_num(e[1], ep + "[1]"));
            } else {
                run.initial.emplace_back(take_num(e, ep), 0.0);
            }
        }
    }
    return run;
}

struct RunConfig {
    std::string command;
    std::string model;
    ModelParams params;
    FrequencyGrid grid;
    SdeRun run;
    NoiseBook book{{"vac", NoiseModel::vacuum()}};
    std::map<std::string, std::string> bindings;  // empty binds every channel to "vac"
    std::vector<size_t> orders;
    std::string out = ".";
    std::map<std::string, double> tolerance;
};

RunConfig parse_config(const json& j) {
    if (!j.is_object()) config_fail("config", "expected an object");
    reject_unknown(j, "config",
                   {"command", "model", "params", "grid", "noise", "run", "orders", "out", "seed",
                    "tolerance"});
    RunConfig rc;
    rc.command = take_str(need(j, "config", "command"), "config.command");
    if (rc.command != "spectrum" && rc.command != "timeseries" && rc.command != "verify")
        config_fail("config.command", "expected spectrum, timeseries, or verify");
    if (j.contains("model"))
        rc.model = take_str(j.at("model"), "config.model");
    else if (rc.command != "verify")
        config_fail("config", "missing key 'model'");
    if (j.contains("params")) rc.params = parse_params(j.at("params"), "config.params");
    if (j.contains("grid")) rc.grid = parse_grid(j.at("grid"), "config.grid");
    if (j.contains("run")) rc.run = parse_run(j.at("run"), "config.run");
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        if (!n.is_object()) config_fail("config.noise", "expected an object");
        reject_unknown(n, "config.noise", {"book", "bindings"});
        if (n.contains("book")) {
            const json& b = n.at("book");
            if (!b.is_object()) config_fail("config.noise.book", "expected an object");
            for (auto it = b.begin(); it != b.end(); ++it)
                rc.book[it.key()] = parse_noise_model(it.value(), "config.noise.book." + it.key());
        }
        if (n.contains("bindings")) {
            const json& b = n.at("bindings");
            if (!b.is_object()) config_fail("config.noise.bindings", "expected an object");
            for (auto it = b.begin(); it != b.end(); ++it)
                rc.bindings[it.key()] = take_str(it.value(), "config.noise.bindings." + it.key());
        }
    }
    if (j.contains("orders")) {
        const json& o = j.at("orders");
        if (!o.is_array()) config_fail("config.orders", "expected an array");
        for (size_t i = 0; i < o.size(); ++i) {
            std::string op = "config.orders[" + std::to_string(i) + "]";
            long long n = take_int(o[i], op);
            if (n < 2) config_fail(op, "expected a truncation order >= 2");
            rc.orders.push_back(size_t(n));
        }
    }
    if (j.contains("out")) rc.out = take_str(j.at("out"), "config.out");
    if (j.contains("seed")) {
        long long s = take_int(j.at("seed"), "config.seed");
        if (s < 0) config_fail("config.seed", "expected a nonnegative integer");
        rc.run.seed = uint64_t(s);
    }
    if (j.contains("tolerance")) {
        const json& t = j.at("tolerance");
        if (!t.is_object()) config_fail("config.tolerance", "expected an object");
        for (auto it = t.begin(); it != t.end(); ++it)
            rc.tolerance[it.key()] = take_num(it.value(), "config.tolerance." + it.key());
    }
    return rc;
}

double tolerance_or(const RunConfig& rc, const std::string& key, double fallback) {
    auto it = rc.tolerance.find(key);
    return it == rc.tolerance.end() ? fallback : it->second;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    os << text;
    if (!os) throw std::runtime_error("short write to '" + p.string() + "'");
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

int cmd_spectrum(const RunConfig& rc) {
    LinearSystem sys = build_model(rc.model, rc.params);
    std::map<std::string, std::string> bindings = rc.bindings;
    if (bindings.empty())
        for (const auto& port : sys.ports) bindings[port] = "vac";
    SpectrumResult sr = output_spectra(sys, rc.book, bindings, rc.grid);

    std::filesystem::create_directories(rc.out);
    std::ostringstream elements, ports;
    write_spectrum_csv(elements, sr);
    write_port_csv(ports, sr);
    write_file(std::filesystem::path(rc.out) / "spectrum.csv", elements.str());
    write_file(std::filesystem::path(rc.out) / "ports.csv", ports.str());

    double margin = stability_margin(sys);
    double tol = tolerance_or(rc, "stability", 1e-9);
    bool stable = margin <= tol;
    json meta = json::parse(sr.metadata);
    meta["stability"] = {{"margin", margin}, {"tolerance", tol}, {"stable", stable}};
    write_file(std::filesystem::path(rc.out) / "metadata.json", meta.dump(2) + "\n");

    std::cout << "model " << sr.model << ": " << sr.labels.size() << " elements, "
              << sr.ports.size() << " channels, " << sr.omega.size() << " frequencies -> " << rc.out
              << "\n";
    std::cout << "stability margin " << num17(margin) << (stable ? "" : " exceeds " + num17(tol))
              << "\n";
    if (!stable) {
        std::cout << "warning: unstable system; spectra describe the formal resolvent only\n";
        return 2;
    }
    return 0;
}

int cmd_timeseries(const RunConfig& rc) {
    LinearSystem sys = build_model(rc.model, rc.params);
    EnsembleResult er = integrate_sde(sys, rc.run);

    std::filesystem::create_directories(rc.out);
    std::ostringstream series;
    write_timeseries_csv(series, er);
    write_file(std::filesystem::path(rc.out) / "timeseries.csv", series.str());
    json meta = json::parse(er.metadata);
    meta["warnings"] = er.warnings;
    write_file(std::filesystem::path(rc.out) / "metadata.json", meta.dump(2) + "\n");

    if (!rc.orders.empty()) {
        auto rows = truncation_convergence(rc.orders, to_double(rc.params.mu),
                                           to_double(rc.params.kappa), to_double(rc.params.tau),
                                           rc.run.drive, rc.run.dt, rc.run.horizon);
        std::ostringstream table;
        table << "order,max_error\n";
        for (const auto& row : rows) table << row.order << ',' << num17(row.max_error) << '\n';
        write_file(std::filesystem::path(rc.out) / "convergence.csv", table.str());
    }

    std::cout << er.labels.size() << " elements, " << er.t.size() << " samples, "
              << rc.run.trajectories << (rc.run.trajectories == 1 ? " trajectory" : " trajectories")
              << " -> " << rc.out << "\n";
    for (const auto& w : er.warnings) std::cout << "warning: " << w << "\n";
    return er.warnings.empty() ? 0 : 2;
}

int cmd_verify(const RunConfig& rc) {
    VerifyReport rep = run_verification();

    std::filesystem::create_directories(rc.out);
    json rows = json::array();
    std::ostringstream table;
    table << "group,item,status,detail\n";
    for (const auto& row : rep.rows) {
        rows.push_back({{"group", row.group},
                        {"item", row.item},
                        {"status", row.status},
                        {"detail", row.detail}});
        table << csv_quote(row.group) << ',' << csv_quote(row.item) << ',' << row.status << ','
              << csv_quote(row.detail) << '\n';
    }
    json doc{{"passes", rep.passes},
             {"deviations", rep.deviations},
             {"failures", rep.failures},
             {"rows", rows}};
    write_file(std::filesystem::path(rc.out) / "verify.json", doc.dump(2) + "\n");
    write_file(std::filesystem::path(rc.out) / "verify.csv", table.str());

    for (const auto& row : rep.rows) {
        std::cout << row.status << "  " << row.group << " :: " << row.item;
        if (!row.detail.empty()) std::cout << "  (" << row.detail << ")";
        std::cout << "\n";
    }
    std::cout << rep.passes << " pass, " << rep.deviations
              << " deviate (oracle-confirmed), " << rep.failures << " fail\n";
    return rep.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear quantum Langevin pipelines: spectra, time series, verification"};
    std::string config_path;
    std::string out_override;
    uint64_t seed_override = 0;
    std::vector<std::string> tol_kv;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    CLI::Option* out_opt = app.add_option("--out", out_override, "output directory (overrides config)");
    CLI::Option* seed_opt = app.add_option("--seed", seed_override, "ensemble seed (overrides config)");
    app.add_option("--tolerance", tol_kv, "KEY=VALUE tolerance override (repeatable)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::ifstream is(config_path);
        if (!is) throw std::runtime_error("cannot read config '" + config_path + "'");
        json doc;
        try {
            doc = json::parse(is);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(std::string("config: ") + e.what());
        }
        RunConfig rc = parse_config(doc);
        if (*out_opt) rc.out = out_override;
        if (*seed_opt) rc.run.seed = seed_override;
        for (const auto& kv : tol_kv) {
            size_t eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::runtime_error("tolerance: expected KEY=VALUE, got '" + kv + "'");
            try {
                rc.tolerance[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
                throw std::runtime_error("tolerance: invalid number in '" + kv + "'");
            }
        }
        if (rc.command == "spectrum") return cmd_spectrum(rc);
        if (rc.command == "timeseries") return cmd_timeseries(rc);
        return cmd_verify(rc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
