#pragma once

// Command-line front end: `compute`, `compare` and `sweep`. Options can also
// come from a TOML/INI config file (--config); flags given on the command
// line win. Exit codes: 0 ok, 1 configuration or input error, 2 infeasible
// or empty region, 3 numerical failure. Errors are also reported as one JSON
// object on stderr. FLEXFOR_LOG sets the log level (off, error, warn, info,
// debug).

#include "flexfor/io.hpp"
#include "flexfor/network_file.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <filesystem>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace flexfor::cli {

struct RunConfig {
    std::string network;
    std::vector<std::string> methods;
    std::string reference = "monte_carlo";
    int k_cap = 12;
    int k_cur = 8;
    std::string uncertainty = "none";
    double epsilon = 0.05;
    double beta = 0.05;
    std::uint64_t seed = 0;
    std::string pv_data;
    int mc_samples = 100000;
    std::uint64_t mc_seed = 42;
    std::string gsk = "capacity";
    std::string out_dir = ".";
    std::vector<std::string> formats{"json", "csv"};
    bool no_timing = false;
    std::vector<double> epsilons;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InfeasibleSystem:
        case ErrorKind::EmptyRegion:
        case ErrorKind::UnboundedRegion:
        case ErrorKind::DegenerateReference:
        case ErrorKind::NoFeasibleSamples:
        case ErrorKind::InfeasibleBase:
        case ErrorKind::BaseViolation:
            return 2;
        case ErrorKind::NumericalFailure:
        case ErrorKind::NonConvergence:
        case ErrorKind::SingularVoltage:
            return 3;
        default:
            return 1;
    }
}

namespace detail {

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"fme", "gsk", "minkowski", "monte_carlo"};
    return m;
}

inline bool wants(const RunConfig& cfg, const char* format) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), format) != cfg.formats.end();
}

inline void check_config(const RunConfig& cfg, bool uses_epsilon) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
    if (cfg.network.empty()) fail("--network is required");
    if (cfg.k_cap < 3 || cfg.k_cur < 3) fail("segment counts must be at least 3");
    for (const std::string& m : cfg.methods) {
        const auto& known = known_methods();
        if (std::find(known.begin(), known.end(), m) == known.end()) fail("unknown method '" + m + "'");
    }
    for (const std::string& f : cfg.formats) {
        if (f != "json" && f != "csv" && f != "svg") fail("unknown output format '" + f + "'");
    }
    if (cfg.uncertainty != "none" && cfg.uncertainty != "quantile" && cfg.uncertainty != "scenario") {
        fail("uncertainty must be none, quantile or scenario");
    }
    if (uses_epsilon) {
        if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) fail("epsilon must lie in (0, 1)");
        if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) fail("beta must lie in (0, 1)");
        if (cfg.pv_data.empty()) fail("--pv-data is required with uncertainty margins");
    }
    if (cfg.mc_samples < 0) fail("--mc-samples must be nonnegative");
}

inline GskScheme load_gsk(const RunConfig& cfg, const NetworkCase& c) {
    if (cfg.gsk == "capacity") return capacity_gsk(c.ders);
    std::ifstream in(cfg.gsk);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open GSK file '" + cfg.gsk + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, cfg.gsk + ": " + e.what());
    }
    // {"g_p": {"<unit id>": share, ...}, "g_q": {...}}
    const auto nc = static_cast<Eigen::Index>(c.ders.size());
    GskScheme g{Eigen::VectorXd::Zero(nc), Eigen::VectorXd::Zero(nc)};
    for (Eigen::Index u = 0; u < nc; ++u) {
        const std::string& id = c.ders[static_cast<std::size_t>(u)].id;
        try {
            g.g_p[u] = j.at("g_p").value(id, 0.0);
            g.g_q[u] = j.at("g_q").value(id, 0.0);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, cfg.gsk + ": " + e.what());
        }
    }
    return g;
}

inline std::optional<MarginSet> margins_for(const RunConfig& cfg, const NetworkCase& c, double epsilon) {
    if (cfg.uncertainty == "none") return std::nullopt;
    const auto dists = load_pv_csv(cfg.pv_data, c.network.s_base());
    const MarginMethod method = cfg.uncertainty == "scenario" ? MarginMethod::Scenario : MarginMethod::Quantile;
    return compute_margins(c.ders, dists, method, epsilon, cfg.beta, cfg.seed);
}

inline ForResult run_method(const std::string& method, const RunConfig& cfg, const NetworkCase& c,
                            const MethodOptions& opt, spdlog::logger& log) {
    log.info("running {}", method);
    ForResult r;
    if (method == "fme") {
        r = fme_for(c, opt);
    } else if (method == "gsk") {
        r = gsk_for(c, load_gsk(cfg, c), opt);
    } else if (method == "minkowski") {
        r = minkowski_for(c, opt);
    } else {
        r = monte_carlo_for(c, cfg.mc_samples, cfg.mc_seed, opt);
    }
    log.info("{}: {} vertices, area {:.6f} p.u.^2, {:.1f} ms", method, r.polygon.size(), area(r.polygon),
             r.wall_time_ms);
    return r;
}

inline std::string path_in(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void write_result(const RunConfig& cfg, const ForResult& r, const std::string& stem, const WriteOptions& wopt) {
    if (wants(cfg, "json")) write_text(path_in(cfg, stem + ".json"), dump(result_to_json(r, wopt)));
    if (wants(cfg, "csv")) write_text(path_in(cfg, stem + ".csv"), polygon_to_csv(r.polygon));
    if (r.report) write_text(path_in(cfg, "elimination_report.json"), dump(report_to_json(*r.report, wopt)));
}

inline std::string epsilon_tag(double eps) {
    std::ostringstream s;
    s << eps;
    return s.str();
}

inline int cmd_compute(const RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
    check_config(cfg, cfg.uncertainty != "none");
    const NetworkCase c = load_network_file(cfg.network);
    MethodOptions opt{cfg.k_cap, cfg.k_cur, margins_for(cfg, c, cfg.epsilon), OrderHeuristic::Network};
    const WriteOptions wopt{!cfg.no_timing};
    std::vector<ForResult> results;
    for (const std::string& m : cfg.methods.empty() ? std::vector<std::string>{"fme"} : cfg.methods) {
        results.push_back(run_method(m, cfg, c, opt, log));
        write_result(cfg, results.back(), "for_" + m, wopt);
        out << m << ": " << results.back().polygon.size() << " vertices, area " << area(results.back().polygon)
            << " p.u.^2\n";
    }
    if (wants(cfg, "svg")) write_text(path_in(cfg, "for.svg"), svg_overlay(results));
    return 0;
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
    check_config(cfg, cfg.uncertainty != "none");
    const std::vector<std::string> methods = cfg.methods.empty() ? known_methods() : cfg.methods;
    if (methods.size() < 2) throw Error(ErrorKind::ConfigError, "compare needs at least two methods");
    const auto ref = std::find(methods.begin(), methods.end(), cfg.reference);
    if (ref == methods.end()) throw Error(ErrorKind::ConfigError, "reference '" + cfg.reference + "' is not selected");
    const NetworkCase c = load_network_file(cfg.network);
    MethodOptions opt{cfg.k_cap, cfg.k_cur, margins_for(cfg, c, cfg.epsilon), OrderHeuristic::Network};
    const WriteOptions wopt{!cfg.no_timing};
    std::vector<ForResult> results;
    for (const std::string& m : methods) results.push_back(run_method(m, cfg, c, opt, log));
    const ForResult& reference = results[static_cast<std::size_t>(ref - methods.begin())];
    const MetricsTable table = compare(results, reference);
    write_text(path_in(cfg, "metrics.json"), dump(metrics_to_json(table, cfg.reference, wopt)));
    if (wants(cfg, "svg")) write_text(path_in(cfg, "for.svg"), svg_overlay(results));
    out << metrics_to_text(table, wopt);
    return 0;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
    if (cfg.epsilons.empty()) throw Error(ErrorKind::ConfigError, "--epsilons needs at least one value");
    RunConfig base = cfg;
    if (base.uncertainty == "none") base.uncertainty = "quantile";
    for (double eps : cfg.epsilons) {
        base.epsilon = eps;
        check_config(base, true);
    }
    const NetworkCase c = load_network_file(cfg.network);
    const std::string method = cfg.methods.empty() ? "fme" : cfg.methods.front();
    const WriteOptions wopt{!cfg.no_timing};
    json sweep = json::array();
    std::vector<ForResult> results;
    for (double eps : cfg.epsilons) {
        MethodOptions opt{cfg.k_cap, cfg.k_cur, margins_for(base, c, eps), OrderHeuristic::Network};
        ForResult r = run_method(method, base, c, opt, log);
        r.method = method + " eps=" + epsilon_tag(eps);
        write_result(base, r, "for_" + method + "_eps_" + epsilon_tag(eps), wopt);
        sweep.push_back({{"epsilon", eps}, {"area_pu2", area(r.polygon)}});
        out << "epsilon " << eps << ": area " << area(r.polygon) << " p.u.^2\n";
        results.push_back(std::move(r));
    }
    write_text(path_in(cfg, "sweep.json"), dump(json{{"method", method}, {"uncertainty", base.uncertainty}, {"points", sweep}}));
    if (wants(cfg, "svg")) write_text(path_in(cfg, "for.svg"), svg_overlay(results));
    return 0;
}

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto log = std::make_shared<spdlog::logger>("flexfor", std::make_shared<spdlog::sinks::ostream_sink_st>(err));
    log->set_pattern("[%l] %v");
    const char* level = std::getenv("FLEXFOR_LOG");
    log->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    return log;
}

inline void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
    err << json{{"kind", kind}, {"message", message}}.dump() << "\n";
}

} // namespace detail

inline void add_common(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--network", cfg.network, "network description (JSON)");
    sub.add_option("--method,--methods", cfg.methods, "fme, gsk, minkowski, monte_carlo")->delimiter(',');
    sub.add_option("--k-cap", cfg.k_cap, "segments per capability disc");
    sub.add_option("--k-cur", cfg.k_cur, "segments per current disc");
    sub.add_option("--uncertainty", cfg.uncertainty, "none, quantile or scenario");
    sub.add_option("--epsilon", cfg.epsilon, "violation probability");
    sub.add_option("--beta", cfg.beta, "scenario confidence parameter");
    sub.add_option("--seed", cfg.seed, "seed for scenario draws");
    sub.add_option("--pv-data", cfg.pv_data, "PV history CSV (unit_id,timestamp,p_kw)");
    sub.add_option("--mc-samples", cfg.mc_samples, "Monte Carlo sample count");
    sub.add_option("--mc-seed", cfg.mc_seed, "Monte Carlo seed");
    sub.add_option("--gsk", cfg.gsk, "'capacity' or a JSON file of shares");
    sub.add_option("--out", cfg.out_dir, "output directory");
    sub.add_option("--format", cfg.formats, "json, csv, svg")->delimiter(',');
    sub.add_flag("--no-timing", cfg.no_timing, "write null wall times");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig cfg;
    CLI::App app{"Feasible operating regions of active distribution networks"};
    app.set_config("--config", "", "TOML/INI file with option defaults, keys named like the long flags");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    // Options live on the top level so one flat config file serves every subcommand.
    add_common(app, cfg);
    app.add_option("--reference", cfg.reference, "reference method for compare");
    app.add_option("--epsilons", cfg.epsilons, "violation probabilities for sweep")->delimiter(',');
    CLI::App* compute = app.add_subcommand("compute", "compute FORs with the selected methods");
    CLI::App* comp = app.add_subcommand("compare", "fill factors and errors against a reference method");
    CLI::App* sweep = app.add_subcommand("sweep", "FOR per uncertainty level");
    for (CLI::App* sub : {compute, comp, sweep}) sub->fallthrough();

    auto log = detail::make_logger(err);
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp& e) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorKind::ConfigError, e.what());
        }
        std::filesystem::create_directories(cfg.out_dir);
        if (compute->parsed()) return detail::cmd_compute(cfg, out, *log);
        if (comp->parsed()) return detail::cmd_compare(cfg, out, *log);
        return detail::cmd_sweep(cfg, out, *log);
    } catch (const Error& e) {
        detail::report_error(err, e.kind_name(), e.what());
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        detail::report_error(err, "ConfigError", e.what());
        return 1;
    }
}

} // namespace flexfor::cli
