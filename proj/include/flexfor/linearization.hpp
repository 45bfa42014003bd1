#pragma once

// Superposition sensitivities around an operating point and assembly of the
// linear inequality system over x = (dP, dQ, dp_1..dp_nc, dq_1..dq_nc).
//
// The DER deviations map linearly to current injections through PICI at the
// operating voltage; injection deviations then propagate through BIBC to the
// branch currents and through DLF to the bus voltages. The initial state
// cancels out, so every constraint is written against the remaining headroom
// at the operating point.

#include "flexfor/linear_system.hpp"
#include "flexfor/network.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace flexfor {

struct SensitivityModel {
    Eigen::MatrixXcd di_map;       // branch currents, n x 2nc
    Eigen::MatrixXcd dv_map;       // bus voltages, n x 2nc
    Eigen::RowVectorXcd di0_map;   // current through the PCC, 1 x 2nc
    Eigen::MatrixXd dpq_map;       // exported (dP, dQ), 2 x 2nc
    OperatingPoint base;

    int unit_count() const { return static_cast<int>(di_map.cols() / 2); }
};

/// Generator incidence: column u places unit u's p at its bus, column nc+u its q.
inline Eigen::MatrixXd generator_incidence(int bus_count, const std::vector<DerUnit>& placement) {
    const int nc = static_cast<int>(placement.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * bus_count, 2 * nc);
    for (int u = 0; u < nc; ++u) {
        const int node = placement[u].node;
        if (node <= 0 || node > bus_count) throw Error(ErrorKind::TopologyError, "DER at invalid node");
        c(node - 1, u) = 1.0;
        c(bus_count + node - 1, nc + u) = 1.0;
    }
    return c;
}

inline SensitivityModel build_sensitivity(const SweepMatrices& m, const OperatingPoint& base,
                                          const std::vector<DerUnit>& placement) {
    const int n = m.size();
    if (base.v.size() != n || base.i.size() != n || m.v_bar.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "operating point does not match the sweep matrices");
    }
    const Eigen::MatrixXcd injection = m.pici * generator_incidence(n, placement).cast<Complex>();
    SensitivityModel s;
    s.di_map = m.bibc.cast<Complex>() * injection;
    s.dv_map = m.dlf * injection;
    s.di0_map = m.pcc_row().cast<Complex>() * injection;
    // dS = V_s conj(dI0): real rows of the export-positive PCC power change.
    const int cols = static_cast<int>(injection.cols());
    s.dpq_map.resize(2, cols);
    const double vr = m.slack.real(), vi = m.slack.imag();
    for (int c = 0; c < cols; ++c) {
        const double a = s.di0_map[c].real(), b = s.di0_map[c].imag();
        s.dpq_map(0, c) = vr * a + vi * b;
        s.dpq_map(1, c) = vi * a - vr * b;
    }
    s.base = base;
    return s;
}

struct HalfPlane {
    Eigen::Vector2d normal;
    double offset = 0.0;

    bool contains(const Eigen::Vector2d& x, double tol = 0.0) const { return normal.dot(x) <= offset + tol; }
};

/// Angular interval [from, to] in radians, counter-clockwise.
struct Arc {
    double from = 0.0;
    double to = 2.0 * std::numbers::pi;

    double width() const { return to - from; }
    bool full() const { return width() >= 2.0 * std::numbers::pi - 1e-12; }
};

/// Chords of a disc between k+1 equally spaced points on the arc (k points for
/// a full circle). Every point satisfying all chords and lying in the arc's
/// sector has norm at most `radius`.
inline std::vector<HalfPlane> inscribe_disc(double radius, int segments, Arc arc = {}) {
    if (!(radius > 0.0)) throw Error(ErrorKind::BadParameter, "disc radius must be positive");
    if (!(arc.width() > 0.0)) throw Error(ErrorKind::BadParameter, "empty arc");
    if (segments < (arc.full() ? 3 : 1)) {
        throw Error(ErrorKind::BadSegmentCount, "too few segments: " + std::to_string(segments));
    }
    const double step = (arc.full() ? 2.0 * std::numbers::pi : arc.width()) / segments;
    const double apothem = radius * std::cos(step / 2.0);
    std::vector<HalfPlane> rows;
    rows.reserve(static_cast<std::size_t>(segments));
    for (int j = 0; j < segments; ++j) {
        const double mid = arc.from + (j + 0.5) * step;
        rows.push_back({Eigen::Vector2d(std::cos(mid), std::sin(mid)), apothem});
    }
    return rows;
}

/// Capability rows of one unit over its own (p, q), absolute coordinates.
inline std::vector<HalfPlane> capability_set(const DerUnit& u, int segments) {
    std::vector<HalfPlane> rows;
    auto add = [&](double np, double nq, double offset) { rows.push_back({Eigen::Vector2d(np, nq), offset}); };
    switch (u.kind) {
        case DerKind::PV: {
            add(-1.0, 0.0, -u.p_lower);
            add(1.0, 0.0, u.p_upper);
            if (u.pf_min <= 0.0) {
                for (const HalfPlane& h : inscribe_disc(u.s_max, segments, {-std::numbers::pi / 2, std::numbers::pi / 2})) {
                    rows.push_back(h);
                }
                break;
            }
            const double phi = std::acos(u.pf_min);
            if (phi < 1e-9) {
                add(1.0, 0.0, u.s_max);
            } else {
                for (const HalfPlane& h : inscribe_disc(u.s_max, segments, {-phi, phi})) rows.push_back(h);
            }
            const double slope = std::tan(phi);
            add(-slope, 1.0, 0.0);
            add(-slope, -1.0, 0.0);
            break;
        }
        case DerKind::BESS:
            add(1.0, 0.0, u.p_upper);
            add(-1.0, 0.0, -u.p_lower);
            for (const HalfPlane& h : inscribe_disc(u.s_max, segments)) rows.push_back(h);
            break;
        case DerKind::DG:
            add(-1.0, 0.0, -u.p_lower);
            if (u.p_upper < u.s_max) add(1.0, 0.0, u.p_upper);
            for (const HalfPlane& h : inscribe_disc(u.s_max, segments)) rows.push_back(h);
            break;
    }
    return rows;
}

/// Capability rows in deviation variables (dp, dq) around the unit's initial
/// setpoint. With `require_base` off, a setpoint outside the set is accepted
/// (a tightened bound may cut below the current dispatch).
inline std::vector<HalfPlane> capability_halfplanes(const DerUnit& u, int segments, bool require_base = true) {
    std::vector<HalfPlane> rows = capability_set(u, segments);
    const Eigen::Vector2d init(u.p_init, u.q_init);
    for (HalfPlane& h : rows) {
        h.offset -= h.normal.dot(init);
        if (require_base && h.offset < -1e-12) {
            throw Error(ErrorKind::InfeasibleBase,
                        "initial setpoint of '" + u.id + "' lies outside its capability set");
        }
    }
    return rows;
}

/// Variable names in system order.
inline std::vector<std::string> variable_labels(const std::vector<DerUnit>& placement) {
    std::vector<std::string> labels{"dP", "dQ"};
    for (const DerUnit& u : placement) labels.push_back("dp_" + u.id);
    for (const DerUnit& u : placement) labels.push_back("dq_" + u.id);
    return labels;
}

namespace detail {

inline std::vector<std::string> model_labels(const SensitivityModel& s) {
    const int nc = s.unit_count();
    std::vector<std::string> labels{"dP", "dQ"};
    for (int u = 0; u < nc; ++u) labels.push_back("dp" + std::to_string(u + 1));
    for (int u = 0; u < nc; ++u) labels.push_back("dq" + std::to_string(u + 1));
    return labels;
}

inline Eigen::RowVectorXd over_x(const Eigen::RowVectorXd& over_units) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(over_units.size() + 2);
    row.tail(over_units.size()) = over_units;
    return row;
}

} // namespace detail

/// Inscribed k-gon of the thermal disc |i_init + dI| <= i_max, with one vertex
/// on the ray through i_init, pulled back to rows over x.
inline LinearSystem current_constraint_rows(const SensitivityModel& s, int branch, Complex i_init, double i_max,
                                            int segments) {
    if (branch < 0 || branch >= s.di_map.rows()) throw Error(ErrorKind::DimensionMismatch, "branch index out of range");
    if (!(i_max > 0.0)) throw Error(ErrorKind::BadParameter, "current limit must be positive");
    if (segments < 3) throw Error(ErrorKind::BadSegmentCount, "too few segments: " + std::to_string(segments));
    if (std::abs(i_init) > i_max) {
        throw Error(ErrorKind::BaseViolation, "branch " + std::to_string(branch) + " exceeds its limit at the base point");
    }
    const double start = std::abs(i_init) > 0.0 ? std::arg(i_init) : 0.0;
    const auto chords = inscribe_disc(i_max, segments, {start, start + 2.0 * std::numbers::pi});
    const Eigen::RowVectorXd re = s.di_map.row(branch).real();
    const Eigen::RowVectorXd im = s.di_map.row(branch).imag();
    LinearSystem rows(detail::model_labels(s));
    for (const HalfPlane& h : chords) {
        const double headroom = h.offset - (h.normal[0] * i_init.real() + h.normal[1] * i_init.imag());
        rows.append(detail::over_x(h.normal[0] * re + h.normal[1] * im), headroom);
    }
    return rows;
}

/// v_min - Re(v_init) <= Re(dV_bus) <= v_max - Re(v_init); `bus` counts from 1.
inline LinearSystem voltage_constraint_rows(const SensitivityModel& s, int bus, Complex v_init, double v_min,
                                            double v_max) {
    if (bus < 1 || bus > s.dv_map.rows()) throw Error(ErrorKind::DimensionMismatch, "bus index out of range");
    if (v_init.real() < v_min || v_init.real() > v_max) {
        throw Error(ErrorKind::BaseViolation, "bus " + std::to_string(bus) + " voltage outside limits at the base point");
    }
    const Eigen::RowVectorXd re = s.dv_map.row(bus - 1).real();
    LinearSystem rows(detail::model_labels(s));
    rows.append(detail::over_x(re), v_max - v_init.real());
    rows.append(detail::over_x(-re), v_init.real() - v_min);
    return rows;
}

struct AssemblyOptions {
    int k_cap = 12;
    int k_cur = 8;
    double v_min = 0.9;
    double v_max = 1.1;
    bool require_base = true;
};

/// Full system in row order: coupling, capability, current, voltage.
inline LinearSystem assemble_system(const RadialNetwork& net, const SensitivityModel& s,
                                    const std::vector<DerUnit>& units, const AssemblyOptions& opt = {}) {
    const int nc = static_cast<int>(units.size());
    const int n = net.size();
    if (s.unit_count() != nc || s.di_map.rows() != n) {
        throw Error(ErrorKind::DimensionMismatch, "sensitivity model does not match the network or units");
    }
    LinearSystem sys(variable_labels(units));
    const int nx = 2 + 2 * nc;

    for (int r = 0; r < 2; ++r) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nx);
        row[r] = 1.0;
        row.tail(2 * nc) = -s.dpq_map.row(r);
        sys.append(row, 0.0);
        sys.append(-row, 0.0);
    }
    for (int u = 0; u < nc; ++u) {
        for (const HalfPlane& h : capability_halfplanes(units[u], opt.k_cap, opt.require_base)) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nx);
            row[2 + u] = h.normal[0];
            row[2 + nc + u] = h.normal[1];
            sys.append(row, h.offset);
        }
    }
    for (int b = 0; b < n; ++b) {
        const LinearSystem rows = current_constraint_rows(s, b, s.base.i[b], net.branches()[b].i_max, opt.k_cur);
        sys.append(LinearSystem(rows.a, rows.b, sys.labels));
    }
    for (int k = 1; k <= n; ++k) {
        const LinearSystem rows = voltage_constraint_rows(s, k, s.base.v[k - 1], opt.v_min, opt.v_max);
        sys.append(LinearSystem(rows.a, rows.b, sys.labels));
    }
    for (int r = 0; r < sys.rows(); ++r) {
        if (sys.a.row(r).cwiseAbs().maxCoeff() == 0.0 && sys.b[r] < 0.0) {
            throw Error(ErrorKind::InfeasibleSystem, "assembled row " + std::to_string(r) + " is 0 <= negative");
        }
    }
    return sys;
}

/// Everything needed to describe a case around its base operating point.
struct LinearizedCase {
    OperatingPoint base;
    SweepMatrices sweep;
    SensitivityModel model;
    LinearSystem system;
};

inline LinearizedCase linearize(const NetworkCase& c, int k_cap = 12, int k_cur = 8) {
    LinearizedCase out;
    out.base = solve_base_point(c.network, c.ders);
    out.sweep = build_sweep_matrices(c.network, out.base.v);
    out.model = build_sensitivity(out.sweep, out.base, c.ders);
    out.system = assemble_system(c.network, out.model, c.ders, {k_cap, k_cur, c.v_min, c.v_max});
    return out;
}

} // namespace flexfor
