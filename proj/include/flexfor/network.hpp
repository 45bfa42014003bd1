#pragma once

// Radial network model and backward/forward sweep (BFS) power flow.
//
// Conventions used throughout the library:
//  * bus 0 is the slack / point of common coupling, buses 1..n are load buses;
//  * branch b is the unique branch feeding bus b+1;
//  * power and current injections are positive into the network;
//  * branch currents are positive flowing toward the root;
//  * the forward sweep drops voltage by DLF times the load current, i.e.
//    v = V_s + DLF · i_inj with generation-positive injections.

#include "flexfor/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <string>
#include <vector>

namespace flexfor {

using Complex = std::complex<double>;

struct Bus {
    int id = 0;
    double load_p = 0.0;
    double load_q = 0.0;
};

struct Branch {
    int from = 0;
    int to = 0;
    Complex impedance{0.0, 0.0};
    double i_max = 0.0;
};

enum class DerKind { PV, BESS, DG };

inline const char* der_kind_name(DerKind kind) {
    switch (kind) {
        case DerKind::PV: return "PV";
        case DerKind::BESS: return "BESS";
        case DerKind::DG: return "DG";
    }
    return "?";
}

/// A controllable unit. `s_max` is the apparent-power radius (not squared).
/// For PV `p_upper` is the available (forecast) power; for BESS the bounds are
/// ±p_max; for DG `p_lower` is the minimum stable generation.
struct DerUnit {
    std::string id;
    int node = 0;
    DerKind kind = DerKind::PV;
    double s_max = 0.0;
    double p_upper = 0.0;
    double p_lower = 0.0;
    double pf_min = 0.0;
    double p_init = 0.0;
    double q_init = 0.0;
};

inline void validate_der(const DerUnit& u, int bus_count) {
    if (u.node <= 0 || u.node > bus_count) {
        throw Error(ErrorKind::TopologyError,
                    "DER '" + u.id + "' placed at invalid node " + std::to_string(u.node));
    }
    if (!(u.s_max > 0.0)) throw Error(ErrorKind::UnitError, "DER '" + u.id + "': s_max must be positive");
    if (u.p_lower > u.p_upper) {
        throw Error(ErrorKind::UnitError, "DER '" + u.id + "': p_lower exceeds p_upper");
    }
    if (u.kind == DerKind::PV && u.p_lower < 0.0) {
        throw Error(ErrorKind::UnitError, "PV '" + u.id + "': negative lower bound");
    }
    if (u.pf_min < 0.0 || u.pf_min > 1.0) {
        throw Error(ErrorKind::UnitError, "DER '" + u.id + "': pf_min outside [0, 1]");
    }
}

/// Immutable radial distribution network in per-unit.
class RadialNetwork {
public:
    RadialNetwork() = default;

    RadialNetwork(std::vector<Bus> buses, std::vector<Branch> branches, Complex slack_voltage,
                  double s_base, double v_base)
        : slack_voltage_(slack_voltage), s_base_(s_base), v_base_(v_base) {
        if (!(s_base > 0.0) || !(v_base > 0.0)) {
            throw Error(ErrorKind::UnitError, "base power and voltage must be positive");
        }
        if (buses.empty()) throw Error(ErrorKind::TopologyError, "network has no buses");
        const int count = static_cast<int>(buses.size());
        std::vector<int> seen(count, 0);
        for (const Bus& bus : buses) {
            if (bus.id < 0 || bus.id >= count) {
                throw Error(ErrorKind::TopologyError,
                            "bus ids must be contiguous 0.." + std::to_string(count - 1));
            }
            if (seen[bus.id]++) {
                throw Error(ErrorKind::TopologyError, "duplicate bus id " + std::to_string(bus.id));
            }
            if (!std::isfinite(bus.load_p) || !std::isfinite(bus.load_q)) {
                throw Error(ErrorKind::UnitError, "non-finite load at bus " + std::to_string(bus.id));
            }
        }
        std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
        buses_ = std::move(buses);

        const int n = count - 1;
        if (static_cast<int>(branches.size()) != n) {
            throw Error(ErrorKind::TopologyError, "a radial network with " + std::to_string(count) +
                                                      " buses needs exactly " + std::to_string(n) +
                                                      " branches");
        }
        std::vector<std::vector<int>> adjacency(count);
        for (int b = 0; b < n; ++b) {
            const Branch& br = branches[b];
            if (br.from < 0 || br.from >= count || br.to < 0 || br.to >= count || br.from == br.to) {
                throw Error(ErrorKind::TopologyError, "branch references invalid buses");
            }
            if (br.impedance.real() < 0.0 || std::abs(br.impedance) <= 0.0) {
                throw Error(ErrorKind::UnitError, "branch impedance must have r >= 0 and |z| > 0");
            }
            if (!(br.i_max > 0.0)) throw Error(ErrorKind::UnitError, "branch current limit must be positive");
            adjacency[br.from].push_back(b);
            adjacency[br.to].push_back(b);
        }

        // Orient every branch away from the root; reject cycles and islands.
        parent_.assign(count, -1);
        depth_.assign(count, 0);
        branches_.assign(n, Branch{});
        std::vector<bool> visited(count, false);
        std::queue<int> frontier;
        frontier.push(0);
        visited[0] = true;
        while (!frontier.empty()) {
            const int bus = frontier.front();
            frontier.pop();
            for (int b : adjacency[bus]) {
                const Branch& br = branches[b];
                const int other = br.from == bus ? br.to : br.from;
                if (other == parent_[bus]) continue;
                if (visited[other]) throw Error(ErrorKind::TopologyError, "branch set contains a cycle");
                visited[other] = true;
                parent_[other] = bus;
                depth_[other] = depth_[bus] + 1;
                branches_[other - 1] = Branch{bus, other, br.impedance, br.i_max};
                frontier.push(other);
            }
        }
        if (std::find(visited.begin(), visited.end(), false) != visited.end()) {
            throw Error(ErrorKind::TopologyError, "network is disconnected");
        }
        for (int k = 1; k < count; ++k) {
            if (parent_[k] == 0) root_branches_.push_back(k - 1);
        }
    }

    /// Number of non-root buses, which equals the number of branches.
    int size() const { return static_cast<int>(branches_.size()); }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }
    Complex slack_voltage() const { return slack_voltage_; }
    double s_base() const { return s_base_; }
    double v_base() const { return v_base_; }
    int parent(int bus) const { return parent_.at(bus); }
    int depth(int bus) const { return depth_.at(bus); }
    const std::vector<int>& root_branches() const { return root_branches_; }

    /// Branch indices on the path from the root to `bus`, root side first.
    std::vector<int> path(int bus) const {
        std::vector<int> out;
        for (int k = bus; k != 0; k = parent_[k]) out.push_back(k - 1);
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<int> parent_;
    std::vector<int> depth_;
    std::vector<int> root_branches_;
    Complex slack_voltage_{1.0, 0.0};
    double s_base_ = 1.0;
    double v_base_ = 1.0;
};

/// A network together with its DER placement and voltage limits.
struct NetworkCase {
    RadialNetwork network;
    std::vector<DerUnit> ders;
    double v_min = 0.9;
    double v_max = 1.1;
};

/// BIBC / BCBV / DLF / PICI operators at a linearization voltage.
struct SweepMatrices {
    Eigen::MatrixXd bibc;   // branch x bus (buses 1..n)
    Eigen::MatrixXcd bcbv;  // bus x branch
    Eigen::MatrixXcd dlf;   // bus x bus
    Eigen::MatrixXcd pici;  // bus x 2n
    Eigen::VectorXcd v_bar;
    Complex slack{1.0, 0.0};
    std::vector<int> root_branches;

    int size() const { return static_cast<int>(bibc.rows()); }

    /// Row vector mapping injection currents to the total current drawn
    /// through the point of common coupling.
    Eigen::RowVectorXd pcc_row() const {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(bibc.cols());
        for (int b : root_branches) row += bibc.row(b);
        return row;
    }
};

inline SweepMatrices build_sweep_matrices(const RadialNetwork& net, const Eigen::VectorXcd& v_bar) {
    const int n = net.size();
    if (v_bar.size() != n) throw Error(ErrorKind::DimensionMismatch, "v_bar length differs from bus count");
    for (int k = 0; k < n; ++k) {
        if (std::abs(v_bar[k]) == 0.0) {
            throw Error(ErrorKind::SingularVoltage, "zero linearization voltage at bus " + std::to_string(k + 1));
        }
    }
    SweepMatrices m;
    m.bibc = Eigen::MatrixXd::Zero(n, n);
    for (int bus = 1; bus <= n; ++bus) {
        for (int b : net.path(bus)) m.bibc(b, bus - 1) = 1.0;
    }
    Eigen::VectorXcd z(n);
    for (int b = 0; b < n; ++b) z[b] = net.branches()[b].impedance;
    m.bcbv = m.bibc.transpose().cast<Complex>() * z.asDiagonal();
    m.dlf = m.bcbv * m.bibc.cast<Complex>();
    m.pici = Eigen::MatrixXcd::Zero(n, 2 * n);
    const Complex j{0.0, 1.0};
    for (int k = 0; k < n; ++k) {
        m.pici(k, k) = 1.0 / std::conj(v_bar[k]);
        m.pici(k, n + k) = 1.0 / (j * std::conj(v_bar[k]));
    }
    m.v_bar = v_bar;
    m.slack = net.slack_voltage();
    m.root_branches = net.root_branches();
    return m;
}

/// Flat start: every bus at the slack voltage.
inline SweepMatrices build_sweep_matrices(const RadialNetwork& net) {
    return build_sweep_matrices(net, Eigen::VectorXcd::Constant(net.size(), net.slack_voltage()));
}

struct Injections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

/// Nodal net injections: DER output minus load, per bus 1..n.
inline Injections injections_from_der(const RadialNetwork& net, const std::vector<DerUnit>& placement,
                                      const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    const auto nc = static_cast<Eigen::Index>(placement.size());
    if (p.size() != nc || q.size() != nc) {
        throw Error(ErrorKind::DimensionMismatch, "DER setpoint vectors do not match the placement");
    }
    const int n = net.size();
    Injections inj{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int k = 0; k < n; ++k) {
        inj.p[k] = -net.buses()[k + 1].load_p;
        inj.q[k] = -net.buses()[k + 1].load_q;
    }
    for (Eigen::Index u = 0; u < nc; ++u) {
        const int node = placement[u].node;
        if (node <= 0 || node > n) throw Error(ErrorKind::TopologyError, "DER at invalid node");
        inj.p[node - 1] += p[u];
        inj.q[node - 1] += q[u];
    }
    return inj;
}

/// Injections at the DERs' initial setpoints.
inline Injections base_injections(const RadialNetwork& net, const std::vector<DerUnit>& placement) {
    Eigen::VectorXd p(placement.size()), q(placement.size());
    for (std::size_t u = 0; u < placement.size(); ++u) {
        p[static_cast<Eigen::Index>(u)] = placement[u].p_init;
        q[static_cast<Eigen::Index>(u)] = placement[u].q_init;
    }
    return injections_from_der(net, placement, p, q);
}

struct BfsState {
    Eigen::VectorXcd i_inj;
    Eigen::VectorXcd i;
    Eigen::VectorXcd v;
};

/// One linearized sweep: current injections at v_bar, backward sweep, forward sweep.
inline BfsState bfs_iteration(const SweepMatrices& m, const Eigen::VectorXd& p_inj, const Eigen::VectorXd& q_inj) {
    const int n = m.size();
    if (p_inj.size() != n || q_inj.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "injection vectors do not match the bus count");
    }
    Eigen::VectorXd pq(2 * n);
    pq << p_inj, q_inj;
    BfsState s;
    s.i_inj = m.pici * pq.cast<Complex>();
    s.i = m.bibc.cast<Complex>() * s.i_inj;
    s.v = Eigen::VectorXcd::Constant(n, m.slack) + m.dlf * s.i_inj;
    return s;
}

struct OperatingPoint {
    Eigen::VectorXcd v;  // buses 1..n
    Eigen::VectorXcd i;  // branches
    Eigen::VectorXd der_p;
    Eigen::VectorXd der_q;
    double pcc_p = 0.0;
    double pcc_q = 0.0;
    int iterations = 0;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 100;
};

/// Iterated BFS on the tree itself (no dense matrices): reusable across many
/// solves, e.g. Monte Carlo sampling.
class PowerFlowSolver {
public:
    explicit PowerFlowSolver(const RadialNetwork& net, PowerFlowOptions options = {})
        : n_(net.size()), slack_(net.slack_voltage()), options_(options) {
        parent_.resize(n_ + 1, 0);
        z_.resize(n_);
        for (int k = 1; k <= n_; ++k) parent_[k] = net.parent(k);
        for (int b = 0; b < n_; ++b) z_[b] = net.branches()[b].impedance;
        // Breadth-first order: parents precede children.
        std::vector<std::vector<int>> children(n_ + 1);
        for (int k = 1; k <= n_; ++k) children[parent_[k]].push_back(k);
        std::queue<int> q;
        q.push(0);
        while (!q.empty()) {
            const int bus = q.front();
            q.pop();
            for (int c : children[bus]) {
                order_.push_back(c);
                q.push(c);
            }
        }
    }

    OperatingPoint solve(const Eigen::VectorXd& p_inj, const Eigen::VectorXd& q_inj) const {
        if (p_inj.size() != n_ || q_inj.size() != n_) {
            throw Error(ErrorKind::DimensionMismatch, "injection vectors do not match the bus count");
        }
        std::vector<Complex> v(n_ + 1, slack_), i_br(n_ + 1);
        for (int it = 1; it <= options_.max_iterations; ++it) {
            backward(v, p_inj, q_inj, i_br);
            double change = 0.0;
            for (int k : order_) {
                const Complex next = v[parent_[k]] + z_[k - 1] * i_br[k];
                change = std::max(change, std::abs(next - v[k]));
                v[k] = next;
            }
            if (!std::isfinite(change)) break;
            if (change < options_.tolerance) return finish(v, p_inj, q_inj, it);
        }
        throw Error(ErrorKind::NonConvergence,
                    "power flow did not converge within " + std::to_string(options_.max_iterations) +
                        " iterations");
    }

    int size() const { return n_; }

private:
    // Injection currents at the given voltages, accumulated toward the root.
    void backward(const std::vector<Complex>& v, const Eigen::VectorXd& p_inj, const Eigen::VectorXd& q_inj,
                  std::vector<Complex>& i_br) const {
        for (int k = 1; k <= n_; ++k) i_br[k] = std::conj(Complex(p_inj[k - 1], q_inj[k - 1]) / v[k]);
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            if (parent_[*it] != 0) i_br[parent_[*it]] += i_br[*it];
        }
    }

    OperatingPoint finish(const std::vector<Complex>& v, const Eigen::VectorXd& p_inj,
                          const Eigen::VectorXd& q_inj, int iterations) const {
        std::vector<Complex> i_br(n_ + 1);
        backward(v, p_inj, q_inj, i_br);
        OperatingPoint op;
        op.iterations = iterations;
        op.v.resize(n_);
        op.i.resize(n_);
        Complex total{};
        for (int k = 1; k <= n_; ++k) {
            op.v[k - 1] = v[k];
            op.i[k - 1] = i_br[k];
            if (parent_[k] == 0) total += i_br[k];
        }
        const Complex s0 = slack_ * std::conj(total);
        op.pcc_p = s0.real();
        op.pcc_q = s0.imag();
        return op;
    }

    int n_;
    Complex slack_;
    PowerFlowOptions options_;
    std::vector<int> parent_;
    std::vector<Complex> z_;
    std::vector<int> order_;
};

/// Converged nonlinear power flow for the given nodal injections.
inline OperatingPoint solve_power_flow(const RadialNetwork& net, const Eigen::VectorXd& p_inj,
                                       const Eigen::VectorXd& q_inj, PowerFlowOptions options = {}) {
    return PowerFlowSolver(net, options).solve(p_inj, q_inj);
}

/// Converged power flow at given DER setpoints; records the setpoints.
inline OperatingPoint solve_power_flow(const RadialNetwork& net, const std::vector<DerUnit>& placement,
                                       const Eigen::VectorXd& der_p, const Eigen::VectorXd& der_q,
                                       PowerFlowOptions options = {}) {
    const Injections inj = injections_from_der(net, placement, der_p, der_q);
    OperatingPoint op = solve_power_flow(net, inj.p, inj.q, options);
    op.der_p = der_p;
    op.der_q = der_q;
    return op;
}

/// Operating point at the DERs' initial setpoints.
inline OperatingPoint solve_base_point(const RadialNetwork& net, const std::vector<DerUnit>& placement,
                                       PowerFlowOptions options = {}) {
    Eigen::VectorXd p(placement.size()), q(placement.size());
    for (std::size_t u = 0; u < placement.size(); ++u) {
        p[static_cast<Eigen::Index>(u)] = placement[u].p_init;
        q[static_cast<Eigen::Index>(u)] = placement[u].q_init;
    }
    return solve_power_flow(net, placement, p, q, options);
}

struct VoltageViolation {
    int bus = 0;
    double value = 0.0;
    double limit = 0.0;
    double excess = 0.0;  // p.u. beyond the limit
};

struct CurrentViolation {
    int branch = 0;
    double magnitude = 0.0;
    double i_max = 0.0;
    double excess = 0.0;  // fraction of i_max beyond the limit
};

struct ViolationReport {
    std::vector<VoltageViolation> voltage;
    std::vector<CurrentViolation> current;

    bool feasible() const { return voltage.empty() && current.empty(); }
};

/// Voltage and thermal limit check. With `use_exact` the voltage magnitude is
/// tested; otherwise its real part, as in the linearized constraints.
inline ViolationReport check_operating_limits(const RadialNetwork& net, const OperatingPoint& op,
                                              const Eigen::VectorXd& v_min, const Eigen::VectorXd& v_max,
                                              bool use_exact = true, double tolerance = 0.0) {
    const int n = net.size();
    if (op.v.size() != n || op.i.size() != n || v_min.size() != n || v_max.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "operating point does not match the network");
    }
    ViolationReport report;
    for (int k = 0; k < n; ++k) {
        const double value = use_exact ? std::abs(op.v[k]) : op.v[k].real();
        if (value < v_min[k] - tolerance) {
            report.voltage.push_back({k + 1, value, v_min[k], v_min[k] - value});
        } else if (value > v_max[k] + tolerance) {
            report.voltage.push_back({k + 1, value, v_max[k], value - v_max[k]});
        }
    }
    for (int b = 0; b < n; ++b) {
        const double mag = std::abs(op.i[b]);
        const double limit = net.branches()[b].i_max;
        if (mag > limit * (1.0 + tolerance)) report.current.push_back({b, mag, limit, mag / limit - 1.0});
    }
    return report;
}

inline ViolationReport check_operating_limits(const NetworkCase& c, const OperatingPoint& op,
                                              bool use_exact = true, double tolerance = 0.0) {
    const int n = c.network.size();
    return check_operating_limits(c.network, op, Eigen::VectorXd::Constant(n, c.v_min),
                                  Eigen::VectorXd::Constant(n, c.v_max), use_exact, tolerance);
}

} // namespace flexfor
