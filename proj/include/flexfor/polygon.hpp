#pragma once

// Convex polygons in the PQ plane: vertex extraction from a two-variable
// inequality system, hulls, clipping, Minkowski sums and comparison metrics.
// Points and segments are valid (degenerate) polygons.

#include "flexfor/linear_system.hpp"
#include "flexfor/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace flexfor {

using Point2 = Eigen::Vector2d;

struct Polygon2D {
    /// Counter-clockwise, no repeated vertices.
    std::vector<Point2> vertices;

    std::size_t size() const { return vertices.size(); }
    bool empty() const { return vertices.empty(); }
    bool degenerate() const { return vertices.size() < 3; }
};

constexpr double kVertexTolerance = 1e-7;

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

inline double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return (p - (a + t * d)).norm();
}

} // namespace detail

/// Monotone-chain hull; collinear and near-duplicate points are dropped.
inline Polygon2D convex_hull(std::vector<Point2> points, double tol = kVertexTolerance) {
    std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    std::vector<Point2> unique;
    for (const Point2& p : points) {
        bool seen = false;
        for (auto it = unique.rbegin(); it != unique.rend() && p.x() - it->x() <= tol; ++it) {
            if ((p - *it).norm() <= tol) {
                seen = true;
                break;
            }
        }
        if (!seen) unique.push_back(p);
    }
    if (unique.size() < 3) {
        Polygon2D out{unique};
        return out;
    }
    // A point counts as a left turn only when it clears the chord by more than
    // `tol`, which also removes nearly collinear vertices.
    auto turns_left = [tol](const Point2& o, const Point2& a, const Point2& b) {
        return detail::cross(o, a, b) > tol * (b - o).norm();
    };
    std::vector<Point2> hull(2 * unique.size());
    std::size_t k = 0;
    for (const Point2& p : unique) {
        while (k >= 2 && !turns_left(hull[k - 2], hull[k - 1], p)) --k;
        hull[k++] = p;
    }
    for (std::size_t i = unique.size() - 1, lower = k + 1; i-- > 0;) {
        const Point2& p = unique[i];
        while (k >= lower && !turns_left(hull[k - 2], hull[k - 1], p)) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    if (hull.size() == 1 && unique.size() > 1) hull.push_back(unique.back());
    return Polygon2D{hull};
}

/// Shoelace area; zero for points and segments.
inline double area(const Polygon2D& p) {
    if (p.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Point2& a = p.vertices[i];
        const Point2& b = p.vertices[(i + 1) % p.size()];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return std::max(0.0, 0.5 * twice);
}

/// Half-planes n·x <= c (unit normals) whose intersection is the polygon.
inline std::vector<std::pair<Point2, double>> halfplanes(const Polygon2D& p) {
    std::vector<std::pair<Point2, double>> rows;
    auto add = [&](Point2 n, double c) {
        const double len = n.norm();
        rows.emplace_back(n / len, c / len);
    };
    if (p.empty()) return rows;
    if (p.size() == 1) {
        const Point2& v = p.vertices[0];
        add({1, 0}, v.x());
        add({-1, 0}, -v.x());
        add({0, 1}, v.y());
        add({0, -1}, -v.y());
    } else if (p.size() == 2) {
        const Point2 &a = p.vertices[0], &b = p.vertices[1];
        const Point2 d = b - a;
        const Point2 n(d.y(), -d.x());
        add(n, n.dot(a));
        add(-n, -n.dot(a));
        add(d, d.dot(b));
        add(-d, -d.dot(a));
    } else {
        for (std::size_t i = 0; i < p.size(); ++i) {
            const Point2& a = p.vertices[i];
            const Point2& b = p.vertices[(i + 1) % p.size()];
            const Point2 n(b.y() - a.y(), a.x() - b.x());
            add(n, n.dot(a));
        }
    }
    return rows;
}

/// Sutherland–Hodgman step against n·x <= c. Points within `tol` count as inside.
inline std::vector<Point2> clip(const std::vector<Point2>& poly, const Point2& normal, double offset, double tol) {
    std::vector<Point2> out;
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Point2& cur = poly[i];
        const Point2& nxt = poly[(i + 1) % m];
        const double dc = normal.dot(cur) - offset;
        const double dn = normal.dot(nxt) - offset;
        if (dc <= tol) out.push_back(cur);
        if ((dc < -tol && dn > tol) || (dc > tol && dn < -tol)) {
            const double t = dc / (dc - dn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

inline bool contains(const Polygon2D& p, const Point2& x, double tol = 1e-9) {
    if (p.empty()) return false;
    for (const auto& [n, c] : halfplanes(p)) {
        if (n.dot(x) > c + tol) return false;
    }
    return true;
}

/// Vertices of {x in R² : A x <= b}.
inline Polygon2D polygon_from_system(const LinearSystem& sys, double tol = 1e-9) {
    if (sys.vars() != 2) throw Error(ErrorKind::DimensionMismatch, "polygon extraction needs exactly two variables");
    double bounds[4];
    const Point2 dirs[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int d = 0; d < 4; ++d) {
        const lp::Result r = lp::maximize(dirs[d], sys.a, sys.b);
        if (r.status == lp::Status::Infeasible) throw Error(ErrorKind::EmptyRegion, "constraint set is empty");
        if (r.status == lp::Status::Unbounded) {
            throw Error(ErrorKind::UnboundedRegion, "constraint set is unbounded in the PQ plane");
        }
        bounds[d] = r.value;
    }
    std::vector<Point2> poly{{bounds[0], -bounds[3]},
                             {bounds[0], bounds[2]},
                             {-bounds[1], bounds[2]},
                             {-bounds[1], -bounds[3]}};
    // Collapse an inverted box from rounding onto its midpoint.
    for (int axis = 0; axis < 2; ++axis) {
        const double hi = bounds[2 * axis], lo = -bounds[2 * axis + 1];
        if (hi < lo) {
            for (Point2& v : poly) v[axis] = 0.5 * (hi + lo);
        }
    }
    for (int r = 0; r < sys.rows(); ++r) {
        const Point2 n(sys.a(r, 0), sys.a(r, 1));
        const double len = n.norm();
        if (len == 0.0) continue;
        poly = clip(poly, n / len, sys.b[r] / len, tol);
        if (poly.empty()) throw Error(ErrorKind::EmptyRegion, "constraint set is empty");
    }
    return convex_hull(poly);
}

/// Convex intersection; EmptyRegion when the polygons are disjoint.
inline Polygon2D intersect(const Polygon2D& a, const Polygon2D& b, double tol = 1e-12) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyRegion, "intersection with an empty polygon");
    std::vector<Point2> poly = a.vertices;
    for (const auto& [n, c] : halfplanes(b)) {
        poly = clip(poly, n, c, tol);
        if (poly.empty()) throw Error(ErrorKind::EmptyRegion, "polygons do not intersect");
    }
    return convex_hull(poly);
}

/// Sum of convex polygons by merging edge vectors in angular order.
inline Polygon2D minkowski_sum(const std::vector<Polygon2D>& polys) {
    if (polys.empty()) return Polygon2D{{Point2::Zero()}};
    Polygon2D acc = polys.front();
    for (std::size_t k = 1; k < polys.size(); ++k) {
        const Polygon2D& p = polys[k];
        if (acc.empty() || p.empty()) throw Error(ErrorKind::EmptyRegion, "Minkowski sum with an empty polygon");
        if (acc.size() < 3 || p.size() < 3) {
            std::vector<Point2> sums;
            for (const Point2& u : acc.vertices) {
                for (const Point2& v : p.vertices) sums.push_back(u + v);
            }
            acc = convex_hull(sums);
            continue;
        }
        auto lowest = [](const std::vector<Point2>& v) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < v.size(); ++i) {
                if (v[i].y() < v[best].y() || (v[i].y() == v[best].y() && v[i].x() < v[best].x())) best = i;
            }
            return best;
        };
        const auto& va = acc.vertices;
        const auto& vb = p.vertices;
        const std::size_t na = va.size(), nb = vb.size();
        const std::size_t sa = lowest(va), sb = lowest(vb);
        std::vector<Point2> out;
        out.reserve(na + nb);
        std::size_t i = 0, j = 0;
        while (i < na || j < nb) {
            out.push_back(va[(sa + i) % na] + vb[(sb + j) % nb]);
            const Point2 ea = va[(sa + i + 1) % na] - va[(sa + i) % na];
            const Point2 eb = vb[(sb + j + 1) % nb] - vb[(sb + j) % nb];
            const double turn = ea.x() * eb.y() - ea.y() * eb.x();
            if (j == nb || (i < na && turn > 0.0)) {
                ++i;
            } else if (i == na || turn < 0.0) {
                ++j;
            } else {
                ++i;
                ++j;
            }
        }
        acc = convex_hull(out);
    }
    return acc;
}

inline Polygon2D translate(const Polygon2D& p, const Point2& shift) {
    Polygon2D out = p;
    for (Point2& v : out.vertices) v += shift;
    return out;
}

/// Image under a linear map; orientation is restored for reflections.
inline Polygon2D transform(const Polygon2D& p, const Eigen::Matrix2d& m) {
    std::vector<Point2> pts;
    pts.reserve(p.size());
    for (const Point2& v : p.vertices) pts.push_back(m * v);
    return convex_hull(pts);
}

/// Distance from a point to a convex polygon (zero inside).
inline double distance(const Polygon2D& p, const Point2& x) {
    if (p.empty()) throw Error(ErrorKind::EmptyRegion, "distance to an empty polygon");
    if (p.size() >= 3 && contains(p, x, 0.0)) return 0.0;
    if (p.size() == 1) return (x - p.vertices[0]).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) {
        best = std::min(best, detail::segment_distance(x, p.vertices[i], p.vertices[(i + 1) % p.size()]));
    }
    return best;
}

/// Hausdorff distance; for convex sets the maximum is reached at a vertex.
inline double hausdorff(const Polygon2D& a, const Polygon2D& b) {
    double h = 0.0;
    for (const Point2& v : a.vertices) h = std::max(h, distance(b, v));
    for (const Point2& v : b.vertices) h = std::max(h, distance(a, v));
    return h;
}

/// Share of the reference covered by `a`: area(a ∩ ref) / area(ref).
inline double fill_factor(const Polygon2D& a, const Polygon2D& reference) {
    const double ref_area = area(reference);
    if (!(ref_area > 0.0)) throw Error(ErrorKind::DegenerateReference, "reference region has zero area");
    double overlap = 0.0;
    try {
        overlap = area(intersect(a, reference));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyRegion) throw;
    }
    return std::clamp(overlap / ref_area, 0.0, 1.0);
}

/// Share of `a` lying outside the reference: 1 - area(a ∩ ref) / area(a).
inline double approx_error(const Polygon2D& a, const Polygon2D& reference) {
    const double ref_area = area(reference);
    if (!(ref_area > 0.0)) throw Error(ErrorKind::DegenerateReference, "reference region has zero area");
    const double own = area(a);
    if (!(own > 0.0)) return 0.0;
    double overlap = 0.0;
    try {
        overlap = area(intersect(a, reference));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyRegion) throw;
    }
    return std::clamp(1.0 - overlap / own, 0.0, 1.0);
}

} // namespace flexfor
