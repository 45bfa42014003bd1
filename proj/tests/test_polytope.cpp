#include "flexfor/fme.hpp"
#include "flexfor/linearization.hpp"
#include "flexfor/lp.hpp"
#include "flexfor/polygon.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace flexfor;

namespace {

LinearSystem make_system(std::initializer_list<std::initializer_list<double>> rows, std::vector<std::string> labels) {
    LinearSystem sys(std::move(labels));
    for (const auto& r : rows) {
        Eigen::RowVectorXd row(static_cast<Eigen::Index>(r.size() - 1));
        Eigen::Index j = 0;
        for (auto it = r.begin(); it + 1 != r.end(); ++it) row[j++] = *it;
        sys.append(row, *(r.end() - 1));
    }
    return sys;
}

std::vector<std::string> names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("x" + std::to_string(i));
    return out;
}

// Bounded, nonempty: random rows through slack around a random interior
// point, plus a box.
LinearSystem random_system(std::mt19937_64& rng, int n, int m) {
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> slack(0.05, 1.0);
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0[j] = 0.3 * gauss(rng);
    LinearSystem sys(names(n));
    for (int j = 0; j < n; ++j) {
        Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
        e[j] = 1.0;
        sys.append(e, 2.0);
        sys.append(-e, 2.0);
    }
    while (sys.rows() < m) {
        Eigen::RowVectorXd row(n);
        for (int j = 0; j < n; ++j) row[j] = gauss(rng);
        sys.append(row, row.dot(x0) + slack(rng));
    }
    return sys;
}

// Can (x0, x1) = p be completed to a feasible point of the full system?
bool extends(const LinearSystem& sys, const Point2& p) {
    const Eigen::Index rest = sys.a.cols() - 2;
    const Eigen::VectorXd b = sys.b - sys.a.leftCols(2) * p;
    if (rest == 0) return (b.array() >= -1e-9).all();
    return lp::feasible_point(sys.a.rightCols(rest), b).has_value();
}

Polygon2D square(double x0, double y0, double side) {
    return convex_hull({{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}});
}

Polygon2D project(const LinearSystem& sys, const ProjectionOptions& opt = {}) {
    return polygon_from_system(project_to_plane(sys, {"x0", "x1"}, nullptr, opt));
}

} // namespace

TEST(FmeEliminate, BoxLeavesBoundsAndTautology) {
    const LinearSystem sys = make_system({{0, -1, 0}, {0, 1, 1}, {-1, 0, 0}, {1, 0, 1}}, {"x", "y"});
    const LinearSystem out = fme_eliminate(sys, "y");
    EXPECT_EQ(out.labels, std::vector<std::string>{"x"});
    ASSERT_EQ(out.rows(), 3);
    EXPECT_EQ(out.a(0, 0), -1.0);
    EXPECT_EQ(out.b[0], 0.0);
    EXPECT_EQ(out.a(1, 0), 1.0);
    EXPECT_EQ(out.b[1], 1.0);
    EXPECT_EQ(out.a(2, 0), 0.0);
    EXPECT_EQ(out.b[2], 1.0);
}

TEST(FmeEliminate, SingleCombinationByHand) {
    // x + y <= 1 and y >= 0 combine to x <= 1.
    const LinearSystem sys = make_system({{1, 1, 1}, {0, -1, 0}, {-1, 0, 0}}, {"x", "y"});
    const LinearSystem out = fme_eliminate(sys, "y");
    ASSERT_EQ(out.rows(), 2);
    EXPECT_EQ(out.a(0, 0), -1.0);
    EXPECT_EQ(out.b[0], 0.0);
    EXPECT_NEAR(out.a(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(out.b[1], 1.0, 1e-15);
}

TEST(FmeEliminate, UnknownVariable) {
    const LinearSystem sys = make_system({{1, 1}}, {"x"});
    try {
        fme_eliminate(sys, "z");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownVariable);
    }
}

TEST(FmeEliminate, FiveVariablesMatchGridOracle) {
    std::mt19937_64 rng(11);
    const LinearSystem sys = random_system(rng, 5, 20);
    LinearSystem proj = sys;
    for (const char* v : {"x4", "x3", "x2"}) proj = fme_eliminate(proj, v);
    int disagreements = 0;
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 50; ++j) {
            const Point2 p(-2.2 + 4.4 * i / 49.0, -2.2 + 4.4 * j / 49.0);
            const double viol = proj.max_violation(p);
            if (std::abs(viol) <= 1e-8) continue;
            if ((viol < 0.0) != extends(sys, p)) ++disagreements;
        }
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(RemoveRedundant, DominatedRow) {
    const LinearSystem out = remove_redundant(make_system({{1, 1}, {1, 2}}, {"x"}), 1e-9);
    ASSERT_EQ(out.rows(), 1);
    EXPECT_DOUBLE_EQ(out.b[0], 1.0);
}

TEST(RemoveRedundant, DuplicatesCollapse) {
    const LinearSystem out = remove_redundant(make_system({{1, 1, 1}, {2, 2, 2}, {-1, 0, 0}, {0, -1, 0}}, {"x", "y"}), 1e-9);
    EXPECT_EQ(out.rows(), 3);
}

TEST(RemoveRedundant, InfeasibleSystem) {
    try {
        remove_redundant(make_system({{1, 0}, {-1, -1}}, {"x"}), 1e-9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InfeasibleSystem);
    }
}

TEST(RemoveRedundant, KeepsEveryRemovedRowCertified) {
    std::mt19937_64 rng(3);
    for (int seed = 0; seed < 10; ++seed) {
        const LinearSystem sys = random_system(rng, 3, 25);
        const LinearSystem kept = remove_redundant(sys, 1e-9);
        EXPECT_LT(kept.rows(), sys.rows());
        for (int r = 0; r < sys.rows(); ++r) {
            const Eigen::VectorXd c = sys.a.row(r).transpose();
            const lp::Result res = lp::maximize(c, kept.a, kept.b);
            ASSERT_TRUE(res.optimal());
            EXPECT_LE(res.value, sys.b[r] + 1e-7);
        }
    }
}

TEST(RemoveRedundant, PolygonUnchanged) {
    std::mt19937_64 rng(8);
    for (int seed = 0; seed < 10; ++seed) {
        const LinearSystem sys = random_system(rng, 2, 25);
        EXPECT_LE(hausdorff(polygon_from_system(sys), polygon_from_system(remove_redundant(sys, 1e-9))), 1e-8);
    }
}

TEST(Projection, AbsentVariableOnlyDropsLabel) {
    const LinearSystem sys = make_system({{1, 0, 0, 0, 1},
                                          {-1, 0, 0, 0, 1},
                                          {0, 1, 0, 0, 1},
                                          {0, -1, 0, 0, 1},
                                          {0, 0, 0, 1, 1},
                                          {0, 0, 0, -1, 1}},
                                         {"x0", "x1", "dp_1", "x3"});
    EliminationReport rep;
    ProjectionOptions opt;
    opt.order = {"dp_1", "x3"};
    const LinearSystem out = project_to_plane(sys, {"x0", "x1"}, &rep, opt);
    EXPECT_EQ(rep.order.front(), "dp_1");
    EXPECT_EQ(rep.steps.front().rows_after, 6);
    EXPECT_NEAR(area(polygon_from_system(out)), 4.0, 1e-12);
}

TEST(Projection, RandomSystemsMatchGridAndSampleOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> vars(3, 6);
    std::uniform_real_distribution<double> box(-2.2, 2.2);
    for (int seed = 0; seed < 20; ++seed) {
        const int n = vars(rng);
        const LinearSystem sys = random_system(rng, n, std::min(25, 2 * n + 6 + seed % 8));
        const LinearSystem proj = project_to_plane(sys, {"x0", "x1"});
        // Dropping the facet that matters most must be caught by the same oracle.
        LinearSystem loose;
        double gain = 0.0;
        for (int drop = 0; drop < proj.rows(); ++drop) {
            std::vector<int> rows;
            for (int r = 0; r < proj.rows(); ++r) {
                if (r != drop) rows.push_back(r);
            }
            LinearSystem candidate = detail::select_rows(proj, rows);
            candidate.append(Eigen::RowVector2d(1, 0), 2.2);
            candidate.append(Eigen::RowVector2d(-1, 0), 2.2);
            candidate.append(Eigen::RowVector2d(0, 1), 2.2);
            candidate.append(Eigen::RowVector2d(0, -1), 2.2);
            const double a = area(polygon_from_system(candidate));
            if (a > gain) {
                gain = a;
                loose = candidate;
            }
        }
        int disagreements = 0, inside = 0, caught = 0;
        auto check = [&](const Point2& p) {
            const bool truth = extends(sys, p);
            inside += truth;
            const double viol = proj.max_violation(p);
            if (std::abs(viol) > 1e-8 && (viol < 0.0) != truth) ++disagreements;
            if (!truth && loose.max_violation(p) < -1e-8) ++caught;
        };
        for (int i = 0; i < 50; ++i) {
            for (int j = 0; j < 50; ++j) check(Point2(-2.2 + 4.4 * i / 49.0, -2.2 + 4.4 * j / 49.0));
        }
        for (int s = 0; s < 1000; ++s) check(Point2(box(rng), box(rng)));
        EXPECT_EQ(disagreements, 0) << "seed " << seed;
        EXPECT_GT(inside, 0);
        EXPECT_LT(inside, 3500);
        EXPECT_GT(caught, 0) << "seed " << seed;
    }
}

TEST(Projection, OrderAndStrategyIndependence) {
    std::mt19937_64 rng(77);
    for (int seed = 0; seed < 5; ++seed) {
        const LinearSystem sys = random_system(rng, 5, 22);
        const Polygon2D greedy = project(sys);
        ProjectionOptions fwd;
        fwd.order = {"x2", "x3", "x4"};
        ProjectionOptions rev;
        rev.order = {"x4", "x3", "x2"};
        ProjectionOptions plain;
        plain.history_filter = false;
        EXPECT_LE(hausdorff(greedy, project(sys, fwd)), 1e-6);
        EXPECT_LE(hausdorff(greedy, project(sys, rev)), 1e-6);
        EXPECT_LE(hausdorff(greedy, project(sys, plain)), 1e-6);
    }
}

TEST(Projection, EqualitySubstitutionMatchesPairing) {
    // x0 = x2 + x3 and x1 = x2 - x3 over a box in (x2, x3).
    const LinearSystem sys = make_system({{1, 0, -1, -1, 0},
                                          {-1, 0, 1, 1, 0},
                                          {0, 1, -1, 1, 0},
                                          {0, -1, 1, -1, 0},
                                          {0, 0, 1, 0, 1},
                                          {0, 0, -1, 0, 1},
                                          {0, 0, 0, 1, 0.5},
                                          {0, 0, 0, -1, 0.5}},
                                         {"x0", "x1", "x2", "x3"});
    ProjectionOptions eq;
    ProjectionOptions noeq;
    noeq.use_equalities = false;
    const Polygon2D a = project(sys, eq);
    EXPECT_NEAR(area(a), 4.0, 1e-9);
    EXPECT_LE(hausdorff(a, project(sys, noeq)), 1e-9);
}

TEST(Projection, ReportTracksEverySteps) {
    std::mt19937_64 rng(5);
    const LinearSystem sys = random_system(rng, 6, 25);
    EliminationReport rep;
    int calls = 0;
    ProjectionOptions opt;
    opt.on_step = [&](const EliminationStep&) { ++calls; };
    const LinearSystem out = project_to_plane(sys, {"x1", "x0"}, &rep, opt);
    EXPECT_EQ(out.labels, (std::vector<std::string>{"x1", "x0"}));
    EXPECT_EQ(rep.order.size(), 4u);
    EXPECT_EQ(calls, 4);
    EXPECT_EQ(rep.initial_rows, 25);
    EXPECT_EQ(rep.final_rows, out.rows());
    for (const auto& s : rep.steps) {
        EXPECT_LE(s.rows_after, s.rows_generated);
        EXPECT_EQ(s.rows_after, s.rows_generated - s.redundancy_removed);
        EXPECT_GE(s.wall_time_ms, 0.0);
    }
}

TEST(Projection, KeptVariableInOrderRejected) {
    ProjectionOptions opt;
    opt.order = {"x0"};
    try {
        project_to_plane(LinearSystem(names(3)), {"x0", "x1"}, nullptr, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BadParameter);
    }
}

TEST(Projection, SingleBessEqualsImageOfCapability) {
    std::vector<Bus> buses{{0, 0, 0}, {1, 0, 0}};
    std::vector<Branch> branches{{0, 1, {0.01, 0.02}, 10.0}};
    NetworkCase c{RadialNetwork(buses, branches, 1.0, 1000.0, 1.0), {}};
    DerUnit u;
    u.id = "U";
    u.node = 1;
    u.kind = DerKind::BESS;
    u.s_max = 1.0;
    u.p_upper = 1.0;
    u.p_lower = -1.0;
    c.ders.push_back(u);
    const auto lc = linearize(c, 4, 4);
    ASSERT_EQ(lc.system.rows(), 16);
    const Polygon2D fme = polygon_from_system(project_to_plane(lc.system, {"dP", "dQ"}));

    LinearSystem cap(std::vector<std::string>{"p", "q"});
    for (const HalfPlane& h : capability_halfplanes(u, 4)) cap.append(h.normal.transpose(), h.offset);
    std::vector<Point2> image;
    for (const Point2& v : polygon_from_system(cap).vertices) image.push_back(lc.model.dpq_map * v);
    EXPECT_LE(hausdorff(fme, convex_hull(image)), 1e-6);
}

TEST(PolygonFromSystem, UnitBox) {
    const Polygon2D p =
        polygon_from_system(make_system({{1, 0, 1}, {-1, 0, 0}, {0, 1, 1}, {0, -1, 0}}, {"x", "y"}));
    ASSERT_EQ(p.size(), 4u);
    const std::vector<Point2> expect{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE((p.vertices[i] - expect[i]).norm(), 1e-12);
}

TEST(PolygonFromSystem, Triangle) {
    const Polygon2D p = polygon_from_system(make_system({{-1, 0, 0}, {0, -1, 0}, {1, 1, 1}}, {"x", "y"}));
    EXPECT_EQ(p.size(), 3u);
    EXPECT_NEAR(area(p), 0.5, 1e-12);
}

TEST(PolygonFromSystem, EmptyAndUnbounded) {
    try {
        polygon_from_system(make_system({{1, 0, 0}, {-1, 0, -1}}, {"x", "y"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyRegion);
    }
    try {
        polygon_from_system(make_system({{1, 0, 0}}, {"x", "y"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnboundedRegion);
    }
}

TEST(PolygonFromSystem, DegenerateSegmentAndPoint) {
    const Polygon2D seg =
        polygon_from_system(make_system({{1, 0, 1}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}}, {"x", "y"}));
    EXPECT_EQ(seg.size(), 2u);
    EXPECT_TRUE(seg.degenerate());
    const Polygon2D pt =
        polygon_from_system(make_system({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}}, {"x", "y"}));
    EXPECT_EQ(pt.size(), 1u);
    EXPECT_EQ(area(pt), 0.0);
}

TEST(Geometry, SquareAreaAndShiftedOverlap) {
    const Polygon2D a = square(0, 0, 1);
    EXPECT_DOUBLE_EQ(area(a), 1.0);
    const Polygon2D both = intersect(a, square(0.5, 0, 1));
    EXPECT_NEAR(area(both), 0.5, 1e-12);
    for (const Point2& v : both.vertices) {
        EXPECT_TRUE(contains(a, v));
        EXPECT_TRUE(contains(square(0.5, 0, 1), v));
    }
}

TEST(Geometry, DisjointIntersectionIsEmptyRegion) {
    try {
        intersect(square(0, 0, 1), square(3, 0, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyRegion);
    }
}

TEST(Geometry, HullDropsInteriorPoints) {
    const Polygon2D h = convex_hull({{0, 0}, {1, 0}, {0.5, 0.5}, {1, 1}, {0.2, 0.7}, {0, 1}, {1, 0.5}});
    EXPECT_LE(hausdorff(h, square(0, 0, 1)), 1e-12);
    EXPECT_EQ(h.size(), 4u);
}

TEST(Geometry, HullContainsAllPoints) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss;
    std::vector<Point2> pts;
    for (int i = 0; i < 200; ++i) pts.emplace_back(gauss(rng), gauss(rng));
    const Polygon2D h = convex_hull(pts);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Point2& a = h.vertices[i];
        const Point2& b = h.vertices[(i + 1) % h.size()];
        for (const Point2& p : pts) EXPECT_GE((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x(), -1e-12);
    }
}

TEST(Minkowski, SquaresDoubleSide) {
    EXPECT_LE(hausdorff(minkowski_sum({square(0, 0, 1), square(0, 0, 1)}), square(0, 0, 2)), 1e-12);
}

TEST(Minkowski, CrossedSegmentsGiveSquare) {
    const Polygon2D s = minkowski_sum({convex_hull({{-1, 0}, {1, 0}}), convex_hull({{0, -1}, {0, 1}})});
    EXPECT_LE(hausdorff(s, square(-1, -1, 2)), 1e-12);
    EXPECT_DOUBLE_EQ(area(s), 4.0);
}

TEST(Minkowski, MatchesPairwiseHull) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Polygon2D> polys;
        for (int k = 0; k < 3; ++k) {
            std::vector<Point2> pts;
            for (int i = 0; i < 6; ++i) pts.emplace_back(gauss(rng), gauss(rng));
            polys.push_back(convex_hull(pts));
        }
        std::vector<Point2> sums{Point2::Zero()};
        std::size_t total = 0;
        for (const Polygon2D& p : polys) {
            total += p.size();
            std::vector<Point2> next;
            for (const Point2& s : sums) {
                for (const Point2& v : p.vertices) next.push_back(s + v);
            }
            sums = std::move(next);
        }
        const Polygon2D m = minkowski_sum(polys);
        EXPECT_LE(hausdorff(m, convex_hull(sums)), 1e-9);
        EXPECT_LE(m.size(), total);
    }
}

TEST(Metrics, IdentityAndHalf) {
    const Polygon2D a = square(0, 0, 1);
    EXPECT_DOUBLE_EQ(fill_factor(a, a), 1.0);
    EXPECT_DOUBLE_EQ(approx_error(a, a), 0.0);
    const Polygon2D half = convex_hull({{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}});
    EXPECT_NEAR(fill_factor(half, a), 0.5, 1e-12);
    EXPECT_NEAR(approx_error(half, a), 0.0, 1e-12);
}

TEST(Metrics, DegenerateReference) {
    try {
        fill_factor(square(0, 0, 1), convex_hull({{0, 0}, {1, 0}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateReference);
    }
}

TEST(Metrics, BoundedAndMonotone) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> shift(-1.0, 1.0);
    std::uniform_real_distribution<double> side(0.1, 2.0);
    const Polygon2D ref = square(0, 0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const double x = shift(rng), y = shift(rng), s = side(rng);
        const Polygon2D small = square(x, y, s);
        const Polygon2D big = square(x - 0.1, y - 0.1, s + 0.2);
        const double phi_small = fill_factor(small, ref);
        const double phi_big = fill_factor(big, ref);
        EXPECT_GE(phi_small, 0.0);
        EXPECT_LE(phi_big, 1.0);
        EXPECT_LE(phi_small, phi_big + 1e-12);
        const double d = approx_error(small, ref);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
    }
}
