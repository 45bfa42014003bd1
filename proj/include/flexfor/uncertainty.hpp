#pragma once

// PV uncertainty margins. Each PV unit's upper active-power bound is replaced
// by an effective bound p̂ that its output reaches with the requested
// probability, estimated either as an empirical quantile or as the minimum
// of N_s seeded draws (scenario approach).

#include "flexfor/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace flexfor {

struct EmpiricalDistribution {
    std::string unit;
    std::vector<double> samples;  // p.u.
    std::string meta;
};

enum class MarginMethod { Quantile, Scenario };

struct MarginSet {
    std::map<std::string, double> bound;  // p̂ per PV unit id, p.u.
    MarginMethod method = MarginMethod::Quantile;
    double epsilon = 0.05;
    double beta = 0.05;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_distribution(const EmpiricalDistribution& dist) {
    if (dist.samples.empty()) throw Error(ErrorKind::EmptyDistribution, "no samples for unit '" + dist.unit + "'");
    for (double s : dist.samples) {
        if (!std::isfinite(s) || s < 0.0) {
            throw Error(ErrorKind::BadParameter, "sample of unit '" + dist.unit + "' is negative or not finite");
        }
    }
}

inline void check_probability(double x, const char* name) {
    if (!(x > 0.0 && x < 1.0)) throw Error(ErrorKind::BadParameter, std::string(name) + " must lie in (0, 1)");
}

inline double clamp_bound(double p, double p_upper) { return std::clamp(p, 0.0, std::max(p_upper, 0.0)); }

} // namespace detail

/// Lower empirical ε-quantile: rank ε·(N−1) into the sorted samples, linearly
/// interpolated, clamped to [0, p_upper].
inline double quantile_margin(const EmpiricalDistribution& dist, double epsilon,
                              double p_upper = std::numeric_limits<double>::infinity()) {
    detail::check_probability(epsilon, "epsilon");
    detail::check_distribution(dist);
    std::vector<double> s = dist.samples;
    std::sort(s.begin(), s.end());
    const double rank = epsilon * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return detail::clamp_bound(s[lo] + frac * (s[hi] - s[lo]), p_upper);
}

/// N_s = ceil(ln β / ln(1−ε)).
inline int scenario_sample_count(double epsilon, double beta) {
    detail::check_probability(epsilon, "epsilon");
    detail::check_probability(beta, "beta");
    const double n = std::log(beta) / std::log1p(-epsilon);
    // ln 0.5 / ln 0.5 may land a hair above 1.
    const double rounded = std::round(n);
    const double count = std::abs(n - rounded) <= 1e-9 * std::max(1.0, rounded) ? rounded : std::ceil(n);
    return std::max(1, static_cast<int>(count));
}

/// Generator for one unit: the run seed and the unit id together pick the stream.
inline std::mt19937_64 unit_stream(std::uint64_t seed, const std::string& unit) {
    std::vector<std::uint32_t> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (unsigned char ch : unit) key.push_back(ch);
    std::seed_seq seq(key.begin(), key.end());
    return std::mt19937_64(seq);
}

/// Minimum of N_s samples drawn with replacement, clamped to [0, p_upper].
inline double scenario_margin(const EmpiricalDistribution& dist, double epsilon, double beta, std::uint64_t seed,
                              double p_upper = std::numeric_limits<double>::infinity()) {
    const int n = scenario_sample_count(epsilon, beta);
    detail::check_distribution(dist);
    std::mt19937_64 rng = unit_stream(seed, dist.unit);
    std::uniform_int_distribution<std::size_t> pick(0, dist.samples.size() - 1);
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) lowest = std::min(lowest, dist.samples[pick(rng)]);
    return detail::clamp_bound(lowest, p_upper);
}

/// Margins for every PV unit in `units`; each needs a distribution.
inline MarginSet compute_margins(const std::vector<DerUnit>& units, const std::vector<EmpiricalDistribution>& dists,
                                 MarginMethod method, double epsilon, double beta = 0.05, std::uint64_t seed = 0) {
    MarginSet out;
    out.method = method;
    out.epsilon = epsilon;
    out.beta = beta;
    out.seed = seed;
    for (const DerUnit& u : units) {
        if (u.kind != DerKind::PV) continue;
        const auto it = std::find_if(dists.begin(), dists.end(), [&](const auto& d) { return d.unit == u.id; });
        if (it == dists.end()) throw Error(ErrorKind::MissingMargin, "no output history for PV unit '" + u.id + "'");
        out.bound[u.id] = method == MarginMethod::Quantile ? quantile_margin(*it, epsilon, u.p_upper)
                                                           : scenario_margin(*it, epsilon, beta, seed, u.p_upper);
    }
    return out;
}

/// PV units get p_upper = p̂. Setpoints are left alone, so the base point and
/// the linearization around it do not depend on the margins.
inline std::vector<DerUnit> apply_margins(std::vector<DerUnit> units, const MarginSet& margins) {
    for (DerUnit& u : units) {
        if (u.kind != DerKind::PV) continue;
        const auto it = margins.bound.find(u.id);
        if (it == margins.bound.end()) throw Error(ErrorKind::MissingMargin, "no margin for PV unit '" + u.id + "'");
        u.p_upper = std::min(u.p_upper, it->second);
        u.p_lower = std::min(u.p_lower, u.p_upper);
    }
    return units;
}

/// PV history CSV with header `unit_id,timestamp,p_kw`; powers are divided by
/// `s_base_kva`. Units come back in order of first appearance.
inline std::vector<EmpiricalDistribution> load_pv_csv(const std::string& path, double s_base_kva) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path + ": empty file");
    auto split = [](const std::string& text) {
        std::vector<std::string> out;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto first = cell.find_first_not_of(" \t\r");
            const auto last = cell.find_last_not_of(" \t\r");
            out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
        }
        return out;
    };
    const std::vector<std::string> header = split(line);
    auto column = [&](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorKind::ParseError, path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_unit = column("unit_id"), c_time = column("timestamp"), c_p = column("p_kw");

    std::vector<EmpiricalDistribution> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = split(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (cells.size() < header.size()) throw Error(ErrorKind::ParseError, where + ": too few columns");
        double p = 0.0;
        try {
            std::size_t used = 0;
            p = std::stod(cells[c_p], &used);
            if (used != cells[c_p].size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw Error(ErrorKind::ParseError, where + ": p_kw is not a number");
        }
        if (!std::isfinite(p) || p < 0.0) throw Error(ErrorKind::UnitError, where + ": p_kw must be finite and >= 0");
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& d) { return d.unit == cells[c_unit]; });
        if (it == out.end()) {
            out.push_back({cells[c_unit], {}, cells[c_time]});
            it = out.end() - 1;
        }
        it->samples.push_back(p / s_base_kva);
    }
    return out;
}

} // namespace flexfor
