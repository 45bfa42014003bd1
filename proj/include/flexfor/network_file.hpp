#pragma once

// Network description files (JSON). Physical units in the file are normalized
// to per-unit against the `base` section:
//
//   {
//     "base":     {"s_kva": 1000, "v_kv": 12.66, "slack_v_pu": 1.0,
//                  "v_min_pu": 0.9, "v_max_pu": 1.1, "branch_limit_factor": 1.25},
//     "buses":    [{"id": 0, "p_kw": 0, "q_kvar": 0}, ...],
//     "branches": [{"from": 0, "to": 1, "r_ohm": 0.0922, "x_ohm": 0.047, "i_max_a": 400}, ...],
//     "ders":     [{"id": "PV12", "node": 12, "kind": "PV", "s_max_kva": 41.8,
//                   "p_upper_kw": 38, "p_lower_kw": 0, "pf_min": 0.9,
//                   "p_init_kw": 19, "q_init_kvar": 0}, ...]
//   }
//
// A branch without `i_max_a` takes `branch_limit_factor` times its current at
// the base operating point (loads plus initial DER setpoints).

#include "flexfor/network.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace flexfor {

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, std::string_view where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorKind::ParseError, std::string(where) + ": missing field '" + key + "'");
    }
    return obj.at(key);
}

inline double number(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_number()) {
        throw Error(ErrorKind::ParseError, std::string(where) + ": field '" + key + "' must be a number");
    }
    return v.get<double>();
}

inline double number_or(const json& obj, const char* key, double fallback, std::string_view where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    return number(obj, key, where);
}

inline int integer(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer()) {
        throw Error(ErrorKind::ParseError, std::string(where) + ": field '" + key + "' must be an integer");
    }
    return v.get<int>();
}

inline DerKind parse_kind(std::string text) {
    for (char& c : text) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (text == "PV") return DerKind::PV;
    if (text == "BESS") return DerKind::BESS;
    if (text == "DG") return DerKind::DG;
    throw Error(ErrorKind::ParseError, "unknown DER kind '" + text + "'");
}

} // namespace detail

/// Parses and validates a network document into a per-unit case.
inline NetworkCase load_network(std::string_view document) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed network document: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::ParseError, "network document must be an object");

    const json& base = detail::require(doc, "base", "network");
    const double s_kva = detail::number(base, "s_kva", "base");
    const double v_kv = detail::number(base, "v_kv", "base");
    if (!(s_kva > 0.0) || !(v_kv > 0.0)) throw Error(ErrorKind::UnitError, "base s_kva and v_kv must be positive");
    const double slack_mag = detail::number_or(base, "slack_v_pu", 1.0, "base");
    const double slack_deg = detail::number_or(base, "slack_angle_deg", 0.0, "base");
    const std::optional<double> limit_factor =
        base.contains("branch_limit_factor") ? std::optional<double>(detail::number(base, "branch_limit_factor", "base"))
                                             : std::nullopt;

    const double z_base = v_kv * v_kv * 1000.0 / s_kva;           // ohm
    const double i_base = s_kva / (std::numbers::sqrt3 * v_kv);   // ampere

    std::vector<Bus> buses;
    const json& bus_list = detail::require(doc, "buses", "network");
    if (!bus_list.is_array()) throw Error(ErrorKind::ParseError, "'buses' must be an array");
    for (const json& b : bus_list) {
        buses.push_back(Bus{detail::integer(b, "id", "bus"), detail::number_or(b, "p_kw", 0.0, "bus") / s_kva,
                            detail::number_or(b, "q_kvar", 0.0, "bus") / s_kva});
    }

    std::vector<Branch> branches;
    std::vector<bool> derived_limit;
    const json& branch_list = detail::require(doc, "branches", "network");
    if (!branch_list.is_array()) throw Error(ErrorKind::ParseError, "'branches' must be an array");
    for (const json& b : branch_list) {
        Branch br;
        br.from = detail::integer(b, "from", "branch");
        br.to = detail::integer(b, "to", "branch");
        br.impedance = Complex(detail::number(b, "r_ohm", "branch"), detail::number(b, "x_ohm", "branch")) / z_base;
        const bool has_limit = b.contains("i_max_a");
        if (!has_limit && !limit_factor) {
            throw Error(ErrorKind::ParseError, "branch without i_max_a and no base.branch_limit_factor");
        }
        // Placeholder until the base operating point is known.
        br.i_max = has_limit ? detail::number(b, "i_max_a", "branch") / i_base : 1.0;
        branches.push_back(br);
        derived_limit.push_back(!has_limit);
    }

    const Complex slack = std::polar(slack_mag, slack_deg * std::numbers::pi / 180.0);
    RadialNetwork net(buses, branches, slack, s_kva, v_kv);

    NetworkCase out;
    out.v_min = detail::number_or(base, "v_min_pu", 0.9, "base");
    out.v_max = detail::number_or(base, "v_max_pu", 1.1, "base");
    if (!(out.v_min < out.v_max)) throw Error(ErrorKind::UnitError, "v_min_pu must be below v_max_pu");

    if (doc.contains("ders")) {
        const json& der_list = doc.at("ders");
        if (!der_list.is_array()) throw Error(ErrorKind::ParseError, "'ders' must be an array");
        for (const json& d : der_list) {
            DerUnit u;
            u.node = detail::integer(d, "node", "der");
            const json& kind = detail::require(d, "kind", "der");
            if (!kind.is_string()) throw Error(ErrorKind::ParseError, "der: 'kind' must be a string");
            u.kind = detail::parse_kind(kind.get<std::string>());
            u.id = d.contains("id") ? d.at("id").get<std::string>()
                                    : std::string(der_kind_name(u.kind)) + std::to_string(u.node);
            u.s_max = detail::number(d, "s_max_kva", "der") / s_kva;
            u.p_upper = detail::number_or(d, "p_upper_kw", u.s_max * s_kva, "der") / s_kva;
            const double lower_kw = u.kind == DerKind::BESS ? -u.p_upper * s_kva : 0.0;
            u.p_lower = detail::number_or(d, "p_lower_kw", lower_kw, "der") / s_kva;
            u.pf_min = detail::number_or(d, "pf_min", 0.0, "der");
            const double default_p = std::clamp(0.0, u.p_lower, std::max(u.p_lower, u.p_upper));
            u.p_init = detail::number_or(d, "p_init_kw", default_p * s_kva, "der") / s_kva;
            u.q_init = detail::number_or(d, "q_init_kvar", 0.0, "der") / s_kva;
            validate_der(u, net.size());
            for (const DerUnit& other : out.ders) {
                if (other.id == u.id) throw Error(ErrorKind::TopologyError, "duplicate DER id '" + u.id + "'");
            }
            out.ders.push_back(u);
        }
    }

    if (std::find(derived_limit.begin(), derived_limit.end(), true) != derived_limit.end()) {
        const OperatingPoint op = solve_base_point(net, out.ders);
        // Map file order to the network's branch order (branch b feeds bus b+1).
        std::vector<Branch> limited = branches;
        for (std::size_t f = 0; f < branches.size(); ++f) {
            if (!derived_limit[f]) continue;
            const int child = net.parent(branches[f].to) == branches[f].from ? branches[f].to : branches[f].from;
            const double mag = std::abs(op.i[child - 1]);
            if (!(mag > 0.0)) {
                throw Error(ErrorKind::UnitError, "cannot derive a current limit for an unloaded branch");
            }
            limited[f].i_max = *limit_factor * mag;
        }
        net = RadialNetwork(buses, limited, slack, s_kva, v_kv);
    }
    out.network = std::move(net);
    return out;
}

inline NetworkCase load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open network file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return load_network(text.str());
}

} // namespace flexfor
