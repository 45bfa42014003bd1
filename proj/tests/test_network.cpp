#include "flexfor/network_file.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace flexfor;

namespace {

const std::string kTwoBus = R"({
  "base": {"s_kva": 1000, "v_kv": 1.0, "slack_v_pu": 1.0},
  "buses": [{"id": 0}, {"id": 1, "p_kw": 100, "q_kvar": 50}],
  "branches": [{"from": 0, "to": 1, "r_ohm": 0.01, "x_ohm": 0.02, "i_max_a": 1000}]
})";

std::string fixture_path() { return std::string(FLEXFOR_DATA_DIR) + "/ieee33.json"; }

RadialNetwork chain(int buses) {
    std::vector<Bus> b;
    std::vector<Branch> br;
    for (int k = 0; k < buses; ++k) b.push_back({k, 0.0, 0.0});
    for (int k = 1; k < buses; ++k) br.push_back({k - 1, k, Complex(0.01 * k, 0.02), 1.0});
    return RadialNetwork(b, br, 1.0, 1.0, 1.0);
}

// Injections for the fixture's base setpoints scaled by `scale` on the loads.
Injections scaled_base(const NetworkCase& c, double scale) {
    Injections inj = base_injections(c.network, c.ders);
    for (int k = 0; k < c.network.size(); ++k) {
        inj.p[k] -= (scale - 1.0) * c.network.buses()[k + 1].load_p;
        inj.q[k] -= (scale - 1.0) * c.network.buses()[k + 1].load_q;
    }
    return inj;
}

} // namespace

TEST(LoadNetwork, MinimalTwoBus) {
    const NetworkCase c = load_network(kTwoBus);
    EXPECT_EQ(c.network.size(), 1);
    EXPECT_EQ(c.network.branches().size(), 1u);
    // Base 1 kV / 1000 kVA gives a 1 ohm impedance base.
    EXPECT_DOUBLE_EQ(c.network.branches()[0].impedance.real(), 0.01);
    EXPECT_DOUBLE_EQ(c.network.branches()[0].impedance.imag(), 0.02);
    EXPECT_DOUBLE_EQ(c.network.buses()[1].load_p, 0.1);
    EXPECT_DOUBLE_EQ(c.network.buses()[1].load_q, 0.05);
    EXPECT_TRUE(c.ders.empty());
}

TEST(LoadNetwork, RejectsCycle) {
    const std::string doc = R"({
      "base": {"s_kva": 1000, "v_kv": 1.0},
      "buses": [{"id": 0}, {"id": 1}, {"id": 2}],
      "branches": [{"from": 1, "to": 2, "r_ohm": 0.1, "x_ohm": 0.1, "i_max_a": 10},
                   {"from": 2, "to": 1, "r_ohm": 0.1, "x_ohm": 0.1, "i_max_a": 10}]
    })";
    try {
        load_network(doc);
        FAIL() << "expected TopologyError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TopologyError);
    }
}

TEST(LoadNetwork, ErrorKinds) {
    auto kind_of = [](const std::string& doc) {
        try {
            load_network(doc);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::ConfigError;
    };
    EXPECT_EQ(kind_of("{not json"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"buses": []})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"base": {"s_kva": 0, "v_kv": 1}, "buses": [{"id": 0}], "branches": []})"),
              ErrorKind::UnitError);
    EXPECT_EQ(kind_of(R"({"base": {"s_kva": 1, "v_kv": 1}, "buses": [{"id": 0}, {"id": 0}],
                          "branches": [{"from": 0, "to": 1, "r_ohm": 1, "x_ohm": 1, "i_max_a": 1}]})"),
              ErrorKind::TopologyError);
    EXPECT_EQ(kind_of(R"({"base": {"s_kva": 1, "v_kv": 1}, "buses": [{"id": 0}, {"id": 2}],
                          "branches": [{"from": 0, "to": 2, "r_ohm": 1, "x_ohm": 1, "i_max_a": 1}]})"),
              ErrorKind::TopologyError);
    EXPECT_EQ(kind_of(R"({"base": {"s_kva": 1, "v_kv": 1}, "buses": [{"id": 0}, {"id": 1}],
                          "branches": [{"from": 0, "to": 1, "r_ohm": -1, "x_ohm": 1, "i_max_a": 1}]})"),
              ErrorKind::UnitError);
    EXPECT_EQ(kind_of(R"({"base": {"s_kva": 1, "v_kv": 1}, "buses": [{"id": 0}, {"id": 1}],
                          "branches": [{"from": 0, "to": 1, "r_ohm": 1, "x_ohm": 1, "i_max_a": 1}],
                          "ders": [{"node": 0, "kind": "PV", "s_max_kva": 1}]})"),
              ErrorKind::TopologyError);
}

TEST(LoadNetwork, ReversedBranchIsOriented) {
    const std::string doc = R"({
      "base": {"s_kva": 1000, "v_kv": 1.0},
      "buses": [{"id": 0}, {"id": 1}, {"id": 2}],
      "branches": [{"from": 2, "to": 1, "r_ohm": 0.1, "x_ohm": 0.1, "i_max_a": 10},
                   {"from": 0, "to": 1, "r_ohm": 0.2, "x_ohm": 0.1, "i_max_a": 10}]
    })";
    const NetworkCase c = load_network(doc);
    EXPECT_EQ(c.network.branches()[0].from, 0);
    EXPECT_EQ(c.network.branches()[0].to, 1);
    EXPECT_EQ(c.network.branches()[1].from, 1);
    EXPECT_EQ(c.network.branches()[1].to, 2);
    EXPECT_DOUBLE_EQ(c.network.branches()[0].impedance.real(), 0.2);
}

TEST(LoadNetwork, Ieee33Fixture) {
    const NetworkCase c = load_network_file(fixture_path());
    EXPECT_EQ(c.network.size(), 32);
    EXPECT_EQ(c.ders.size(), 19u);
    int pv = 0, bess = 0, dg = 0;
    double pv_kw = 0.0, bess_kw = 0.0, dg_kva = 0.0;
    for (const DerUnit& u : c.ders) {
        if (u.kind == DerKind::PV) ++pv, pv_kw += u.p_upper * 1000.0;
        if (u.kind == DerKind::BESS) ++bess, bess_kw += u.p_upper * 1000.0;
        if (u.kind == DerKind::DG) ++dg, dg_kva += u.s_max * 1000.0;
    }
    EXPECT_EQ(pv, 10);
    EXPECT_EQ(bess, 5);
    EXPECT_EQ(dg, 4);
    EXPECT_NEAR(pv_kw, 353.0, 1e-9);
    EXPECT_NEAR(bess_kw, 350.0, 1e-9);
    EXPECT_NEAR(dg_kva, 1000.0, 1e-9);
    // Derived thermal limits sit at 125% of the base-point current.
    const OperatingPoint op = solve_base_point(c.network, c.ders);
    for (int b = 0; b < 32; ++b) {
        EXPECT_NEAR(c.network.branches()[b].i_max, 1.25 * std::abs(op.i[b]), 1e-12);
    }
}

TEST(SweepMatrices, ChainBibc) {
    const SweepMatrices m = build_sweep_matrices(chain(3));
    Eigen::MatrixXd expected(2, 2);
    expected << 1, 1, 0, 1;
    EXPECT_EQ(m.bibc, expected);
}

TEST(SweepMatrices, StarBibcIsIdentity) {
    std::vector<Bus> b{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    std::vector<Branch> br{{0, 1, {0.1, 0.1}, 1.0}, {0, 2, {0.1, 0.2}, 1.0}};
    const SweepMatrices m = build_sweep_matrices(RadialNetwork(b, br, 1.0, 1.0, 1.0));
    EXPECT_EQ(m.bibc, Eigen::MatrixXd::Identity(2, 2));
    EXPECT_EQ(m.root_branches.size(), 2u);
}

TEST(SweepMatrices, PiciAtUnitVoltage) {
    const SweepMatrices m = build_sweep_matrices(chain(4));
    const int n = 3;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const Complex left = r == c ? Complex(1, 0) : Complex(0, 0);
            const Complex right = r == c ? Complex(0, -1) : Complex(0, 0);
            EXPECT_NEAR(std::abs(m.pici(r, c) - left), 0.0, 1e-15);
            EXPECT_NEAR(std::abs(m.pici(r, n + c) - right), 0.0, 1e-15);
        }
    }
}

TEST(SweepMatrices, SingularVoltageRejected) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(2);
    v[1] = 0.0;
    try {
        build_sweep_matrices(chain(3), v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularVoltage);
    }
}

TEST(SweepMatrices, PathImpedanceMatchesTreeWalk) {
    const NetworkCase c = load_network_file(fixture_path());
    const RadialNetwork& net = c.network;
    const SweepMatrices m = build_sweep_matrices(net);
    for (int k = 1; k <= net.size(); ++k) {
        Complex walked{};
        for (int bus = k; bus != 0; bus = net.parent(bus)) walked += net.branches()[bus - 1].impedance;
        Complex via_bibc{};
        for (int b = 0; b < net.size(); ++b) via_bibc += m.bibc(b, k - 1) * net.branches()[b].impedance;
        EXPECT_NEAR(std::abs(walked - via_bibc), 0.0, 1e-14);
        // DLF diagonal is the same series impedance.
        EXPECT_NEAR(std::abs(m.dlf(k - 1, k - 1) - walked), 0.0, 1e-14);
        // Leaf columns carry exactly depth ones.
        EXPECT_DOUBLE_EQ(m.bibc.col(k - 1).sum(), net.depth(k));
    }
}

TEST(Injections, LoadOnlyAndCancellation) {
    const NetworkCase c = load_network(kTwoBus);
    const auto none = injections_from_der(c.network, {}, Eigen::VectorXd(0), Eigen::VectorXd(0));
    EXPECT_DOUBLE_EQ(none.p[0], -0.1);
    EXPECT_DOUBLE_EQ(none.q[0], -0.05);

    DerUnit u;
    u.node = 1;
    u.s_max = 1.0;
    Eigen::VectorXd p(1), q(1);
    p << 0.1;
    q << 0.05;
    const auto cancel = injections_from_der(c.network, {u}, p, q);
    EXPECT_DOUBLE_EQ(cancel.p[0], 0.0);
    EXPECT_DOUBLE_EQ(cancel.q[0], 0.0);
}

TEST(Injections, CoLocatedUnitsSum) {
    const RadialNetwork net = chain(3);
    DerUnit a, b;
    a.node = b.node = 2;
    a.s_max = b.s_max = 1.0;
    Eigen::VectorXd p(2), q(2);
    p << 0.1, 0.2;
    q << 0.0, 0.0;
    const auto inj = injections_from_der(net, {a, b}, p, q);
    EXPECT_NEAR(inj.p[1], 0.3, 1e-15);
    EXPECT_DOUBLE_EQ(inj.p[0], 0.0);
}

TEST(Injections, DimensionMismatch) {
    DerUnit a;
    a.node = 1;
    try {
        injections_from_der(chain(2), {a}, Eigen::VectorXd(2), Eigen::VectorXd(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(BfsIteration, ZeroInjections) {
    const SweepMatrices m = build_sweep_matrices(chain(5));
    const auto s = bfs_iteration(m, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4));
    EXPECT_EQ(s.i.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((s.v.array() - Complex(1.0, 0.0)).abs().maxCoeff(), 0.0);
}

TEST(BfsIteration, TwoBusHandEvaluation) {
    const NetworkCase c = load_network(kTwoBus);
    const SweepMatrices m = build_sweep_matrices(c.network);
    Eigen::VectorXd p(1), q(1);
    p << -0.1;
    q << -0.05;
    const auto s = bfs_iteration(m, p, q);
    // i = conj(P + jQ) / conj(v_bar) with v_bar = 1.
    const Complex i = std::conj(Complex(-0.1, -0.05)) / std::conj(Complex(1.0, 0.0));
    EXPECT_NEAR(std::abs(s.i[0] - Complex(-0.1, 0.05)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s.i[0] - i), 0.0, 1e-15);
    // Voltage drops under load: v = 1 + z * i_inj = 0.998 - 0.0015j.
    EXPECT_NEAR(std::abs(s.v[0] - Complex(0.998, -0.0015)), 0.0, 1e-15);
    EXPECT_LT(std::abs(s.v[0]), 1.0);
}

TEST(BfsIteration, Superposition) {
    const NetworkCase c = load_network_file(fixture_path());
    const SweepMatrices m = build_sweep_matrices(c.network);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.05);
    const int n = c.network.size();
    Eigen::VectorXd px(n), qx(n), py(n), qy(n);
    for (int k = 0; k < n; ++k) px[k] = g(rng), qx[k] = g(rng), py[k] = g(rng), qy[k] = g(rng);
    const auto fx = bfs_iteration(m, px, qx);
    const auto fy = bfs_iteration(m, py, qy);
    const auto fxy = bfs_iteration(m, px + py, qx + qy);
    const auto f0 = bfs_iteration(m, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
    EXPECT_LT((fxy.v - (fx.v + fy.v - f0.v)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((fxy.i - (fx.i + fy.i - f0.i)).cwiseAbs().maxCoeff(), 1e-14);
    const auto f2x = bfs_iteration(m, 2.0 * px, 2.0 * qx);
    EXPECT_LT(((f2x.v - f0.v) - 2.0 * (fx.v - f0.v)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((f2x.i - 2.0 * fx.i).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PowerFlow, ZeroInjectionsConvergeImmediately) {
    const RadialNetwork net = chain(6);
    const OperatingPoint op = solve_power_flow(net, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5));
    EXPECT_EQ(op.iterations, 1);
    EXPECT_EQ(op.i.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((op.v.array() - Complex(1.0, 0.0)).abs().maxCoeff(), 0.0);
    EXPECT_EQ(op.pcc_p, 0.0);
    EXPECT_EQ(op.pcc_q, 0.0);
}

TEST(PowerFlow, TwoBusMatchesScalarFixedPoint) {
    const NetworkCase c = load_network(kTwoBus);
    Eigen::VectorXd p(1), q(1);
    p << -0.1;
    q << -0.05;
    const OperatingPoint op = solve_power_flow(c.network, p, q);
    // Independent scalar iteration v <- 1 + z * conj(s / v).
    const Complex z(0.01, 0.02), s(-0.1, -0.05);
    Complex v = 1.0;
    for (int it = 0; it < 200; ++it) v = 1.0 + z * std::conj(s / v);
    EXPECT_NEAR(std::abs(op.v[0] - v), 0.0, 1e-8);
    // Power balance at bus 1 and at the PCC (losses are positive).
    EXPECT_NEAR(std::abs(op.v[0] * std::conj(op.i[0]) - s), 0.0, 1e-8);
    const Complex s_pcc(op.pcc_p, op.pcc_q);
    const Complex losses = -(s_pcc - s);
    EXPECT_NEAR(std::abs(losses - z * std::norm(op.i[0])), 0.0, 1e-8);
    EXPECT_GT(losses.real(), 0.0);
}

TEST(PowerFlow, AbsurdLoadDoesNotConverge) {
    const NetworkCase c = load_network(kTwoBus);
    Eigen::VectorXd p(1), q(1);
    p << -100.0;
    q << -50.0;
    try {
        solve_power_flow(c.network, p, q);
        FAIL() << "expected NonConvergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
    }
}

TEST(PowerFlow, FirstIterationEqualsLinearModel) {
    const NetworkCase c = load_network_file(fixture_path());
    const Injections inj = base_injections(c.network, c.ders);
    const SweepMatrices m = build_sweep_matrices(c.network);
    const auto linear = bfs_iteration(m, inj.p, inj.q);
    const OperatingPoint first = solve_power_flow(c.network, inj.p, inj.q, PowerFlowOptions{1e9, 1});
    EXPECT_EQ(first.iterations, 1);
    EXPECT_LT((first.v - linear.v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PowerFlow, NodalBalanceWithinTwentyPercentOfBaseLoad) {
    const NetworkCase c = load_network_file(fixture_path());
    const RadialNetwork& net = c.network;
    for (double scale : {0.8, 1.0, 1.2}) {
        const Injections inj = scaled_base(c, scale);
        const OperatingPoint op = solve_power_flow(net, inj.p, inj.q);
        double worst = 0.0;
        for (int k = 1; k <= net.size(); ++k) {
            // KCL: injected current = branch current minus children's branch currents.
            Complex i_inj = op.i[k - 1];
            for (int j = 1; j <= net.size(); ++j) {
                if (net.parent(j) == k) i_inj -= op.i[j - 1];
            }
            const Complex s = op.v[k - 1] * std::conj(i_inj);
            worst = std::max(worst, std::abs(s - Complex(inj.p[k - 1], inj.q[k - 1])));
            // KVL along the branch.
            const Complex v_parent = net.parent(k) == 0 ? net.slack_voltage() : op.v[net.parent(k) - 1];
            worst = std::max(worst, std::abs(op.v[k - 1] - (v_parent + net.branches()[k - 1].impedance * op.i[k - 1])));
        }
        EXPECT_LT(worst, 1e-6) << "scale " << scale;
    }
}

TEST(PowerFlow, SingleIterationAccuracyOnFixture) {
    const NetworkCase c = load_network_file(fixture_path());
    const Injections inj = base_injections(c.network, c.ders);
    const auto linear = bfs_iteration(build_sweep_matrices(c.network), inj.p, inj.q);
    const OperatingPoint op = solve_power_flow(c.network, inj.p, inj.q);
    const double gap = (linear.v.cwiseAbs() - op.v.cwiseAbs()).cwiseAbs().maxCoeff();
    EXPECT_LT(gap, 5e-3);
}

TEST(OperatingLimits, Examples) {
    const RadialNetwork net = chain(3);
    OperatingPoint op;
    op.v = Eigen::VectorXcd::Ones(2);
    op.i = Eigen::VectorXcd::Zero(2);
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, 0.9), hi = Eigen::VectorXd::Constant(2, 1.1);
    EXPECT_TRUE(check_operating_limits(net, op, lo, hi).feasible());

    op.v[0] = 0.85;
    auto report = check_operating_limits(net, op, lo, hi);
    ASSERT_EQ(report.voltage.size(), 1u);
    EXPECT_EQ(report.voltage[0].bus, 1);
    EXPECT_NEAR(report.voltage[0].excess, 0.05, 1e-12);

    op.v[0] = 1.0;
    op.i[1] = 1.3 * net.branches()[1].i_max;
    report = check_operating_limits(net, op, lo, hi);
    ASSERT_EQ(report.current.size(), 1u);
    EXPECT_EQ(report.current[0].branch, 1);
    EXPECT_NEAR(report.current[0].excess, 0.3, 1e-12);
}

TEST(OperatingLimits, RealPartModeUsesLinearizedVoltage) {
    const RadialNetwork net = chain(2);
    OperatingPoint op;
    op.v = Eigen::VectorXcd::Constant(1, std::polar(1.0, 0.5));  // |v| = 1, Re(v) ~ 0.878
    op.i = Eigen::VectorXcd::Zero(1);
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, 0.9), hi = Eigen::VectorXd::Constant(1, 1.1);
    EXPECT_TRUE(check_operating_limits(net, op, lo, hi, true).feasible());
    EXPECT_FALSE(check_operating_limits(net, op, lo, hi, false).feasible());
}
