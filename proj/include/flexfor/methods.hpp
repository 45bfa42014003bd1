#pragma once

// End-to-end FOR pipelines and the comparison harness. Every polygon is in
// absolute PCC coordinates: the base-point PCC exchange plus the deviation.

#include "flexfor/fme.hpp"
#include "flexfor/linearization.hpp"
#include "flexfor/polygon.hpp"
#include "flexfor/uncertainty.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace flexfor {

struct ForResult {
    std::string method;
    Polygon2D polygon;
    Point2 base = Point2::Zero();  // PCC exchange at the base point
    double wall_time_ms = 0.0;
    std::optional<EliminationReport> report;
    std::vector<Point2> samples;  // kept Monte Carlo points
};

enum class OrderHeuristic {
    Network,  // unit by unit, deepest in the feeder first
    Greedy,   // smallest |J|·|K| next
};

struct MethodOptions {
    int k_cap = 12;
    int k_cur = 8;
    std::optional<MarginSet> margins;
    OrderHeuristic order = OrderHeuristic::Network;
};

struct GskScheme {
    Eigen::VectorXd g_p;
    Eigen::VectorXd g_q;
};

namespace detail {

using clock = std::chrono::steady_clock;

inline double elapsed_ms(clock::time_point start) {
    // Never report zero, even for trivial cases on a coarse clock.
    return std::max(std::chrono::duration<double, std::milli>(clock::now() - start).count(), 1e-6);
}

inline std::vector<DerUnit> tightened(const NetworkCase& c, const MethodOptions& opt) {
    return opt.margins ? apply_margins(c.ders, *opt.margins) : c.ders;
}

/// Linearized at the untightened base point; margins only move capability rows.
inline LinearizedCase linearize_case(const NetworkCase& c, const MethodOptions& opt) {
    LinearizedCase lc = linearize(c, opt.k_cap, opt.k_cur);
    if (opt.margins) {
        lc.system = assemble_system(c.network, lc.model, tightened(c, opt),
                                    {opt.k_cap, opt.k_cur, c.v_min, c.v_max, false});
    }
    return lc;
}

inline Point2 pcc_of(const OperatingPoint& op) { return {op.pcc_p, op.pcc_q}; }

} // namespace detail

/// dq then dp of each unit, units ordered by decreasing depth in the feeder.
inline std::vector<std::string> network_elimination_order(const NetworkCase& c) {
    std::vector<std::size_t> units(c.ders.size());
    for (std::size_t u = 0; u < units.size(); ++u) units[u] = u;
    std::stable_sort(units.begin(), units.end(), [&](std::size_t a, std::size_t b) {
        return c.network.depth(c.ders[a].node) > c.network.depth(c.ders[b].node);
    });
    std::vector<std::string> order;
    for (std::size_t u : units) {
        order.push_back("dq_" + c.ders[u].id);
        order.push_back("dp_" + c.ders[u].id);
    }
    return order;
}

inline ForResult fme_for(const NetworkCase& c, const MethodOptions& opt = {}) {
    const auto start = detail::clock::now();
    const LinearizedCase lc = detail::linearize_case(c, opt);
    ForResult out;
    out.method = "fme";
    out.base = detail::pcc_of(lc.base);
    ProjectionOptions popt;
    if (opt.order == OrderHeuristic::Network) popt.order = network_elimination_order(c);
    EliminationReport report;
    const LinearSystem plane = project_to_plane(lc.system, {"dP", "dQ"}, &report, popt);
    out.polygon = translate(polygon_from_system(plane), out.base);
    out.report = report;
    out.wall_time_ms = detail::elapsed_ms(start);
    return out;
}

/// Keys proportional to active capacity (g_p) and to reactive headroom at the
/// base setpoint (g_q).
inline GskScheme capacity_gsk(const std::vector<DerUnit>& units) {
    const auto nc = static_cast<Eigen::Index>(units.size());
    GskScheme g{Eigen::VectorXd(nc), Eigen::VectorXd(nc)};
    for (Eigen::Index u = 0; u < nc; ++u) {
        const DerUnit& d = units[static_cast<std::size_t>(u)];
        g.g_p[u] = std::max(d.p_upper, 0.0);
        g.g_q[u] = std::sqrt(std::max(d.s_max * d.s_max - d.p_init * d.p_init, 0.0));
    }
    if (nc > 0) {
        if (g.g_p.sum() > 0.0) g.g_p /= g.g_p.sum();
        if (g.g_q.sum() > 0.0) g.g_q /= g.g_q.sum();
    }
    return g;
}

inline void validate_gsk(const GskScheme& g, std::size_t units) {
    const auto nc = static_cast<Eigen::Index>(units);
    if (g.g_p.size() != nc || g.g_q.size() != nc) {
        throw Error(ErrorKind::DimensionMismatch, "GSK vectors do not match the unit count");
    }
    for (const Eigen::VectorXd* v : {&g.g_p, &g.g_q}) {
        if ((v->array() < 0.0).any()) throw Error(ErrorKind::BadParameter, "GSK entries must be nonnegative");
        if (std::abs(v->sum() - 1.0) > 1e-9) throw Error(ErrorKind::BadParameter, "GSK entries must sum to 1");
    }
}

/// The DERs follow fixed shares of the total change: Δp = g_p·α, Δq = g_q·β.
/// The sensitivity model maps (α, β) to (ΔP, ΔQ) through a 2×2 matrix M;
/// inverting it turns every row into a row over (ΔP, ΔQ) directly.
inline ForResult gsk_for(const NetworkCase& c, const GskScheme& scheme, const MethodOptions& opt = {}) {
    const auto start = detail::clock::now();
    validate_gsk(scheme, c.ders.size());
    const LinearizedCase lc = detail::linearize_case(c, opt);
    const auto nc = static_cast<Eigen::Index>(c.ders.size());
    ForResult out;
    out.method = "gsk";
    out.base = detail::pcc_of(lc.base);

    // Columns of the rows in (α, β).
    Eigen::MatrixXd shares = Eigen::MatrixXd::Zero(2 + 2 * nc, 2);
    shares.block(2, 0, nc, 1) = scheme.g_p;
    shares.block(2 + nc, 1, nc, 1) = scheme.g_q;
    Eigen::Matrix2d m;
    m.row(0) = lc.model.dpq_map.row(0) * shares.bottomRows(2 * nc);
    m.row(1) = lc.model.dpq_map.row(1) * shares.bottomRows(2 * nc);
    if (std::abs(m.determinant()) < 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff() * m.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::NumericalFailure, "GSK map from unit shares to the PCC is singular");
    }
    const Eigen::Matrix2d m_inv = m.inverse();

    // The four coupling rows are the definition of M and are dropped.
    LinearSystem plane(std::vector<std::string>{"dP", "dQ"});
    for (int r = 4; r < lc.system.rows(); ++r) {
        const Eigen::RowVector2d over_shares = lc.system.a.row(r) * shares;
        plane.append(over_shares * m_inv, lc.system.b[r]);
    }
    out.polygon = translate(polygon_from_system(plane), out.base);
    out.wall_time_ms = detail::elapsed_ms(start);
    return out;
}

/// Sum of the units' own capability polygons, ignoring the network.
inline ForResult minkowski_for(const NetworkCase& c, const MethodOptions& opt = {}) {
    const auto start = detail::clock::now();
    if (c.ders.empty()) throw Error(ErrorKind::BadParameter, "Minkowski sum needs at least one unit");
    ForResult out;
    out.method = "minkowski";
    out.base = detail::pcc_of(solve_base_point(c.network, c.ders));
    std::vector<Polygon2D> parts;
    for (const DerUnit& u : detail::tightened(c, opt)) {
        LinearSystem cap(std::vector<std::string>{"dp", "dq"});
        for (const HalfPlane& h : capability_halfplanes(u, opt.k_cap, false)) cap.append(h.normal.transpose(), h.offset);
        parts.push_back(polygon_from_system(cap));
    }
    out.polygon = translate(minkowski_sum(parts), out.base);
    out.wall_time_ms = detail::elapsed_ms(start);
    return out;
}

/// Exact (unlinearized) capability set membership.
inline bool in_capability(const DerUnit& u, double p, double q) {
    if (p < u.p_lower || p > u.p_upper || p * p + q * q > u.s_max * u.s_max) return false;
    if (u.kind == DerKind::PV && u.pf_min > 0.0) return std::abs(q) <= std::tan(std::acos(u.pf_min)) * p;
    return true;
}

/// Uniform (p, q) in the unit's exact capability set by rejection from its box.
template <class Rng>
inline Point2 sample_capability(const DerUnit& u, Rng& rng) {
    const double p_hi = std::min(u.p_upper, u.s_max);
    const double p_lo = std::max(u.p_lower, -u.s_max);
    std::uniform_real_distribution<double> p_dist(p_lo, p_hi);
    std::uniform_real_distribution<double> q_dist(-u.s_max, u.s_max);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const double p = p_dist(rng), q = q_dist(rng);
        if (in_capability(u, p, q)) return {p, q};
    }
    // A set too thin to hit (e.g. p pinned to zero by a full margin).
    return {std::clamp(0.0, p_lo, p_hi), 0.0};
}

/// Nonlinear reference: random dispatches inside the exact capability sets,
/// solved with the full power flow, kept when every limit holds.
inline ForResult monte_carlo_for(const NetworkCase& c, int n_samples, std::uint64_t seed,
                                 const MethodOptions& opt = {}) {
    const auto start = detail::clock::now();
    if (n_samples < 0) throw Error(ErrorKind::BadParameter, "sample count must be nonnegative");
    const std::vector<DerUnit> units = detail::tightened(c, opt);
    ForResult out;
    out.method = "monte_carlo";
    out.base = detail::pcc_of(solve_base_point(c.network, c.ders));
    const PowerFlowSolver solver(c.network);
    const auto nc = static_cast<Eigen::Index>(c.ders.size());
    Eigen::VectorXd p(nc), q(nc);
    for (int s = 0; s < n_samples; ++s) {
        // One stream per sample so results do not depend on evaluation order.
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        for (Eigen::Index u = 0; u < nc; ++u) {
            const Point2 x = sample_capability(units[static_cast<std::size_t>(u)], rng);
            p[u] = x.x();
            q[u] = x.y();
        }
        const Injections inj = injections_from_der(c.network, units, p, q);
        OperatingPoint op;
        try {
            op = solver.solve(inj.p, inj.q);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NonConvergence) continue;
            throw;
        }
        if (check_operating_limits(c, op).feasible()) out.samples.push_back(detail::pcc_of(op));
    }
    if (out.samples.empty()) throw Error(ErrorKind::NoFeasibleSamples, "no Monte Carlo sample met every limit");
    out.polygon = convex_hull(out.samples);
    out.wall_time_ms = detail::elapsed_ms(start);
    return out;
}

struct MetricsRow {
    std::string method;
    double area = 0.0;
    double fill_factor = 0.0;
    double error = 0.0;
    double wall_time_ms = 0.0;
};

using MetricsTable = std::vector<MetricsRow>;

inline MetricsTable compare(const std::vector<ForResult>& results, const ForResult& reference) {
    if (!(area(reference.polygon) > 0.0)) {
        throw Error(ErrorKind::DegenerateReference, "reference region '" + reference.method + "' has zero area");
    }
    MetricsTable table;
    for (const ForResult& r : results) {
        table.push_back({r.method, area(r.polygon), fill_factor(r.polygon, reference.polygon),
                         approx_error(r.polygon, reference.polygon), r.wall_time_ms});
    }
    return table;
}

} // namespace flexfor
