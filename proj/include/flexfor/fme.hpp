#pragma once

// Fourier–Motzkin elimination with redundancy control.
//
// Eliminating x_v splits the rows into I (no x_v), J (x_v bounded below) and
// K (x_v bounded above); the projection keeps I and adds one row per pair in
// J × K. Pruning redundant rows after every step keeps the system small.
// When x_v appears in an equality (an opposing pair of rows) the equality is
// solved for x_v and substituted instead, which is exact and adds no rows.
// Each row remembers which starting rows it combines; a combination of more
// rows than it has shed variables (plus one) is redundant and never built.

#include "flexfor/linear_system.hpp"
#include "flexfor/lp.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace flexfor {

struct EliminationStep {
    std::string variable;
    int rows_before = 0;
    int rows_generated = 0;  // rows built: |I| plus the J×K combinations not skipped
    int rows_skipped = 0;    // J×K combinations dropped by the history rule before entering the system
    int rows_after = 0;
    int redundancy_removed = 0;
    bool substitution = false;
    double wall_time_ms = 0.0;
};

struct EliminationReport {
    std::vector<std::string> order;
    std::vector<EliminationStep> steps;
    int initial_rows = 0;
    int initial_rows_after_pruning = 0;
    int final_rows = 0;
    double wall_time_ms = 0.0;
};

struct RedundancyOptions {
    double tol = 1e-9;
    /// Below this Chebyshev radius the set is treated as flat and every row is
    /// certified against all other kept rows.
    double flat_radius = 1e-9;
};

namespace detail {

constexpr double kZeroCoefficient = 1e-12;

inline LinearSystem without_column(const LinearSystem& sys, int col) {
    const int n = sys.vars();
    Eigen::MatrixXd a(sys.rows(), n - 1);
    if (col > 0) a.leftCols(col) = sys.a.leftCols(col);
    if (col < n - 1) a.rightCols(n - 1 - col) = sys.a.rightCols(n - 1 - col);
    std::vector<std::string> labels = sys.labels;
    labels.erase(labels.begin() + col);
    return LinearSystem(std::move(a), sys.b, std::move(labels));
}

/// Scales the row to unit norm after zeroing negligible coefficients. Returns
/// false for an all-zero row, or one that is negligible next to `reference`
/// (the size of the rows it was combined from).
template <class Row>
inline bool normalize_row(Row&& row, double& bound, double reference = 0.0) {
    const double scale = row.cwiseAbs().maxCoeff();
    if (!(scale > 1e-10 * reference)) return false;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (std::abs(row[j]) <= kZeroCoefficient * scale) row[j] = 0.0;
    }
    const double norm = row.norm();
    row /= norm;
    bound /= norm;
    return true;
}

/// Finds rows equal (or opposite) to a given row within a coefficient
/// tolerance: rows are sorted by their projection on a fixed direction, so
/// near-equal rows are neighbours in that order.
class RowIndex {
public:
    RowIndex(const Eigen::MatrixXd& a, double tol) : a_(a), tol_(tol) {
        const Eigen::Index n = a.cols();
        w_.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) w_[j] = 0.5 + 0.5 * std::sin(12.9898 * static_cast<double>(j + 1));
        window_ = tol * w_.cwiseAbs().sum() + 1e-15;
        proj_.resize(static_cast<std::size_t>(a.rows()));
        order_.resize(static_cast<std::size_t>(a.rows()));
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            proj_[static_cast<std::size_t>(r)] = a.row(r).dot(w_);
            order_[static_cast<std::size_t>(r)] = static_cast<int>(r);
        }
        std::sort(order_.begin(), order_.end(), [&](int x, int y) {
            return proj_[static_cast<std::size_t>(x)] < proj_[static_cast<std::size_t>(y)];
        });
        sorted_.resize(order_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) sorted_[i] = proj_[static_cast<std::size_t>(order_[i])];
    }

    /// Rows r' != r with a_r' = sign * a_r within the tolerance.
    template <class Visit>
    void matches(int r, double sign, Visit&& visit) const {
        const double target = sign * proj_[static_cast<std::size_t>(r)];
        auto it = std::lower_bound(sorted_.begin(), sorted_.end(), target - window_);
        for (auto i = static_cast<std::size_t>(it - sorted_.begin()); i < sorted_.size() && sorted_[i] <= target + window_;
             ++i) {
            const int k = order_[i];
            if (k == r) continue;
            if ((a_.row(k) - sign * a_.row(r)).cwiseAbs().maxCoeff() <= tol_) visit(k);
        }
    }

private:
    const Eigen::MatrixXd& a_;
    double tol_;
    Eigen::VectorXd w_;
    double window_ = 0.0;
    std::vector<double> proj_;
    std::vector<double> sorted_;
    std::vector<int> order_;
};

constexpr double kSameRow = 1e-10;

/// Normalized rows, zero rows dropped, parallel rows merged keeping the
/// tightest bound (ties go to the lower `priority`, if given). `origin`
/// receives the input index of every kept row. Throws InfeasibleSystem on
/// 0 <= negative.
inline LinearSystem canonical_rows(const LinearSystem& sys, double tol, const std::vector<int>* priority = nullptr,
                                   std::vector<int>* origin = nullptr) {
    const int n = sys.vars();
    Eigen::MatrixXd a(sys.rows(), n);
    Eigen::VectorXd b(sys.rows());
    std::vector<int> source;
    Eigen::Index count = 0;
    for (int r = 0; r < sys.rows(); ++r) {
        Eigen::RowVectorXd row = sys.a.row(r);
        double bound = sys.b[r];
        if (!normalize_row(row, bound)) {
            if (bound < -tol) throw Error(ErrorKind::InfeasibleSystem, "row reduces to 0 <= negative");
            continue;
        }
        a.row(count) = row;
        b[count++] = bound;
        source.push_back(r);
    }
    a.conservativeResize(count, Eigen::NoChange);
    b.conservativeResize(count);

    auto rank = [&](int r) { return priority ? (*priority)[static_cast<std::size_t>(source[static_cast<std::size_t>(r)])] : 0; };
    const RowIndex index(a, kSameRow);
    std::vector<int> keep;
    std::vector<bool> merged(static_cast<std::size_t>(count), false);
    for (int r = 0; r < count; ++r) {
        if (merged[static_cast<std::size_t>(r)]) continue;
        int best = r;
        index.matches(r, 1.0, [&](int k) {
            if (k < r || merged[static_cast<std::size_t>(k)]) return;
            merged[static_cast<std::size_t>(k)] = true;
            if (b[k] < b[best] - 1e-12 || (b[k] <= b[best] + 1e-12 && rank(k) < rank(best))) best = k;
        });
        keep.push_back(best);
    }
    LinearSystem out(sys.labels);
    out.a.resize(static_cast<Eigen::Index>(keep.size()), n);
    out.b.resize(static_cast<Eigen::Index>(keep.size()));
    if (origin) origin->clear();
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.a.row(static_cast<Eigen::Index>(i)) = a.row(keep[i]);
        out.b[static_cast<Eigen::Index>(i)] = b[keep[i]];
        if (origin) origin->push_back(source[static_cast<std::size_t>(keep[i])]);
    }
    return out;
}

/// For each row of a canonical system, the index of an opposing row that
/// pins it to an equality (-1 if none). Throws InfeasibleSystem when two
/// opposing rows exclude each other.
inline std::vector<int> equality_partners(const LinearSystem& sys, double tol) {
    std::vector<int> partner(static_cast<std::size_t>(sys.rows()), -1);
    const RowIndex index(sys.a, kSameRow);
    for (int r = 0; r < sys.rows(); ++r) {
        index.matches(r, -1.0, [&](int k) {
            const double gap = sys.b[r] + sys.b[k];
            if (gap < -tol) throw Error(ErrorKind::InfeasibleSystem, "opposing rows leave no feasible point");
            if (gap <= tol && partner[static_cast<std::size_t>(r)] < 0) partner[static_cast<std::size_t>(r)] = k;
        });
    }
    return partner;
}

inline LinearSystem select_rows(const LinearSystem& sys, const std::vector<int>& keep) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(keep.size()), sys.vars());
    Eigen::VectorXd b(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) = sys.a.row(keep[i]);
        b[static_cast<Eigen::Index>(i)] = sys.b[keep[i]];
    }
    return LinearSystem(std::move(a), std::move(b), sys.labels);
}

/// max a_r·x over the given rows, capped at b_r + 1 so the LP stays bounded.
inline double support(const LinearSystem& sys, const std::vector<int>& rows, int r, Eigen::VectorXd* argmax) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd a(m + 1, sys.vars());
    Eigen::VectorXd b(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        a.row(i) = sys.a.row(rows[static_cast<std::size_t>(i)]);
        b[i] = sys.b[rows[static_cast<std::size_t>(i)]];
    }
    a.row(m) = sys.a.row(r);
    b[m] = sys.b[r] + 1.0;
    const lp::Result res = lp::maximize(sys.a.row(r).transpose(), a, b);
    if (res.status == lp::Status::Infeasible) throw Error(ErrorKind::InfeasibleSystem, "constraint set is empty");
    if (res.status != lp::Status::Optimal) throw Error(ErrorKind::NumericalFailure, "capped support LP not optimal");
    if (argmax) *argmax = res.x;
    return res.value;
}

} // namespace detail

struct RedundancyStats {
    int removed = 0;
    int lp_solves = 0;
};

namespace detail {

/// Facets of the set described by a fixed list of rows, grown on demand;
/// feeds the capped support LPs without copying the whole list each time.
class FacetList {
public:
    FacetList(const LinearSystem& sys) : sys_(sys), a_(0, sys.vars()), b_(0) {}

    void add(int r) {
        rows_.push_back(r);
        stale_ = true;
    }
    const std::vector<int>& rows() const { return rows_; }

    /// max a_r·x over the listed rows, capped at b_r + 1.
    double support(int r, Eigen::VectorXd* argmax) {
        const auto m = static_cast<Eigen::Index>(rows_.size());
        if (stale_) {
            const Eigen::Index old = a_.rows() == 0 ? 0 : a_.rows() - 1;
            a_.conservativeResize(m + 1, Eigen::NoChange);
            b_.conservativeResize(m + 1);
            for (Eigen::Index i = old; i < m; ++i) {
                a_.row(i) = sys_.a.row(rows_[static_cast<std::size_t>(i)]);
                b_[i] = sys_.b[rows_[static_cast<std::size_t>(i)]];
            }
            stale_ = false;
        }
        a_.row(m) = sys_.a.row(r);
        b_[m] = sys_.b[r] + 1.0;
        const lp::Result res = lp::maximize(sys_.a.row(r).transpose(), a_, b_);
        if (res.status == lp::Status::Infeasible) throw Error(ErrorKind::InfeasibleSystem, "constraint set is empty");
        if (res.status != lp::Status::Optimal) throw Error(ErrorKind::NumericalFailure, "capped support LP not optimal");
        if (argmax) *argmax = res.x;
        return res.value;
    }

private:
    const LinearSystem& sys_;
    std::vector<int> rows_;
    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    bool stale_ = true;
};

/// Redundancy removal returning the input indices of the rows kept.
/// `hint` marks input rows already known to be facets; they skip
/// certification. `priority` breaks ties between duplicate rows.
inline std::vector<int> prune(const LinearSystem& input, const RedundancyOptions& opt, RedundancyStats* stats,
                              const std::vector<int>* priority = nullptr, const std::vector<bool>* hint = nullptr) {
    std::vector<int> origin;
    const LinearSystem sys = canonical_rows(input, opt.tol, priority, &origin);
    const int m = sys.rows();
    RedundancyStats local;
    local.removed = input.rows() - m;
    if (m == 0) {
        if (stats) *stats = local;
        return origin;
    }
    const std::vector<int> partner = equality_partners(sys, opt.tol);
    std::vector<bool> is_equality(static_cast<std::size_t>(m));
    std::vector<int> equalities, candidates;
    for (int r = 0; r < m; ++r) {
        is_equality[static_cast<std::size_t>(r)] = partner[static_cast<std::size_t>(r)] >= 0;
        (is_equality[static_cast<std::size_t>(r)] ? equalities : candidates).push_back(r);
    }

    const auto ball = lp::chebyshev_center(sys.a, sys.b, is_equality, 1.0);
    ++local.lp_solves;
    if (!ball) throw Error(ErrorKind::InfeasibleSystem, "constraint set is empty");

    std::vector<bool> redundant(static_cast<std::size_t>(m), false);
    if (ball->radius > opt.flat_radius) {
        // Clarkson's method: certify each candidate against the rows already
        // known to be facets; when the certificate fails, shoot a ray from the
        // interior point towards the LP optimum and promote the first row hit.
        const Eigen::VectorXd z = ball->center;
        std::vector<bool> facet(static_cast<std::size_t>(m), false);
        FacetList known(sys);
        for (int r : equalities) known.add(r);
        if (hint) {
            for (int r : candidates) {
                if ((*hint)[static_cast<std::size_t>(origin[static_cast<std::size_t>(r)])]) {
                    facet[static_cast<std::size_t>(r)] = true;
                    known.add(r);
                }
            }
        }
        for (int r : candidates) {
            while (!facet[static_cast<std::size_t>(r)]) {
                Eigen::VectorXd x;
                const double best = known.support(r, &x);
                ++local.lp_solves;
                if (best <= sys.b[r] + opt.tol) {
                    redundant[static_cast<std::size_t>(r)] = true;
                    break;
                }
                const Eigen::VectorXd dir = x - z;
                int hit = -1;
                double t_hit = std::numeric_limits<double>::infinity();
                for (int c : candidates) {
                    if (redundant[static_cast<std::size_t>(c)] || facet[static_cast<std::size_t>(c)]) continue;
                    const double rate = sys.a.row(c).dot(dir);
                    if (rate <= 0.0) continue;
                    const double t = (sys.b[c] - sys.a.row(c).dot(z)) / rate;
                    if (t < t_hit - 1e-12 || (t <= t_hit + 1e-12 && c == r)) {
                        t_hit = std::min(t, t_hit);
                        hit = c;
                    }
                }
                if (hit < 0) hit = r;
                facet[static_cast<std::size_t>(hit)] = true;
                known.add(hit);
            }
        }
    } else {
        for (int r : candidates) {
            std::vector<int> others;
            for (int c = 0; c < m; ++c) {
                if (c != r && !redundant[static_cast<std::size_t>(c)]) others.push_back(c);
            }
            ++local.lp_solves;
            if (support(sys, others, r, nullptr) <= sys.b[r] + opt.tol) redundant[static_cast<std::size_t>(r)] = true;
        }
    }

    std::vector<int> keep;
    for (int r = 0; r < m; ++r) {
        if (!redundant[static_cast<std::size_t>(r)]) keep.push_back(origin[static_cast<std::size_t>(r)]);
    }
    local.removed += m - static_cast<int>(keep.size());
    if (stats) *stats = local;
    return keep;
}

} // namespace detail

/// Drops every row whose removal leaves the feasible set unchanged (within
/// tol). Kept rows come back normalized.
inline LinearSystem remove_redundant(const LinearSystem& input, const RedundancyOptions& opt = {},
                                     RedundancyStats* stats = nullptr) {
    const std::vector<int> keep = detail::prune(input, opt, stats);
    LinearSystem out = detail::select_rows(input, keep);
    for (int r = 0; r < out.rows(); ++r) detail::normalize_row(out.a.row(r), out.b[r]);
    return out;
}

inline LinearSystem remove_redundant(const LinearSystem& input, double tol) {
    RedundancyOptions opt;
    opt.tol = tol;
    return remove_redundant(input, opt);
}

/// One Fourier–Motzkin step: rows of I unchanged, then one row per (j, k) in J × K.
inline LinearSystem fme_eliminate(const LinearSystem& sys, std::string_view var) {
    const int v = sys.index_of(var);
    std::vector<int> I, J, K;
    for (int r = 0; r < sys.rows(); ++r) {
        const double c = sys.a(r, v);
        const double scale = sys.a.row(r).cwiseAbs().maxCoeff();
        if (std::abs(c) <= detail::kZeroCoefficient * std::max(scale, 1.0)) {
            I.push_back(r);
        } else {
            (c < 0.0 ? J : K).push_back(r);
        }
    }
    LinearSystem out(sys.labels);
    const auto rows = static_cast<Eigen::Index>(I.size() + J.size() * K.size());
    out.a.resize(rows, sys.vars());
    out.b.resize(rows);
    Eigen::Index next = 0;
    for (int r : I) {
        out.a.row(next) = sys.a.row(r);
        out.a(next, v) = 0.0;
        out.b[next++] = sys.b[r];
    }
    for (int j : J) {
        const double cj = -sys.a(j, v);
        for (int k : K) {
            const double ck = sys.a(k, v);
            Eigen::RowVectorXd row = sys.a.row(j) / cj + sys.a.row(k) / ck;
            double bound = sys.b[j] / cj + sys.b[k] / ck;
            row[v] = 0.0;
            detail::normalize_row(row, bound);
            out.a.row(next) = row;
            out.b[next++] = bound;
        }
    }
    return detail::without_column(out, v);
}

namespace detail {

struct Pivot {
    int row = -1;      // one row of the opposing pair
    int partner = -1;  // the other
};

/// An equality of the (canonical) system in which `col` has a usable coefficient.
inline Pivot equality_pivot(const LinearSystem& sys, const std::vector<int>& partner, int col) {
    Pivot best;
    double best_abs = 1e-6;
    for (int r = 0; r < sys.rows(); ++r) {
        const int p = partner[static_cast<std::size_t>(r)];
        if (p < 0 || p < r) continue;
        const double c = std::abs(sys.a(r, col));
        if (c > best_abs) {
            best_abs = c;
            best = {r, p};
        }
    }
    return best;
}

} // namespace detail

struct ProjectionOptions {
    /// Explicit elimination order; empty selects the greedy heuristic.
    std::vector<std::string> order;
    /// Solve equalities for a variable instead of pairing its bounds.
    bool use_equalities = true;
    /// Skip combined rows that Chernikov's rule proves redundant.
    bool history_filter = true;
    RedundancyOptions redundancy;
    /// Called after every step, e.g. for progress logging.
    std::function<void(const EliminationStep&)> on_step;
};

namespace detail {

class Bits {
public:
    Bits() = default;
    explicit Bits(int size) : words_(static_cast<std::size_t>((size + 63) / 64), 0) {}

    void set(int i) { words_[static_cast<std::size_t>(i / 64)] |= std::uint64_t{1} << (i % 64); }
    Bits& operator|=(const Bits& o) {
        for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
        return *this;
    }
    int count() const {
        int total = 0;
        for (std::uint64_t w : words_) total += std::popcount(w);
        return total;
    }
    /// Number of bits set here but not in `mask`.
    int count_outside(const Bits& mask) const {
        int total = 0;
        for (std::size_t w = 0; w < words_.size(); ++w) total += std::popcount(words_[w] & ~mask.words_[w]);
        return total;
    }

private:
    std::vector<std::uint64_t> words_;
};

// Rows plus, per row, the original rows it combines and the original
// variables those rows touch.
struct TrackedSystem {
    LinearSystem sys;
    std::vector<Bits> history;
    std::vector<Bits> touched;
    std::vector<int> column;  // current column -> original column
    int original_vars = 0;
    // The rule is only sound when counting starts from a system without
    // equalities.
    bool flat_start = false;

    void restart_history(double tol) {
        const std::vector<int> partner = equality_partners(sys, tol);
        flat_start = std::any_of(partner.begin(), partner.end(), [](int p) { return p >= 0; });
        for (int r = 0; r < sys.rows(); ++r) {
            Bits h(sys.rows());
            h.set(r);
            history[static_cast<std::size_t>(r)] = std::move(h);
            touched[static_cast<std::size_t>(r)] = support_of(sys.a.row(r));
        }
    }

    Bits support_of(const Eigen::RowVectorXd& row) const {
        Bits nz(original_vars);
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            if (row[j] != 0.0) nz.set(column[static_cast<std::size_t>(j)]);
        }
        return nz;
    }
};

struct Generated {
    LinearSystem sys;
    std::vector<Bits> history;
    std::vector<Bits> touched;
    std::vector<int> size;
    std::vector<bool> facet;
    int filtered = 0;
    int skipped = 0;

    explicit Generated(const std::vector<std::string>& labels) : sys(labels) {}
    void reserve(std::size_t rows, int vars) {
        sys.a.resize(static_cast<Eigen::Index>(rows), vars);
        sys.b.resize(static_cast<Eigen::Index>(rows));
    }
    void push(const Eigen::RowVectorXd& row, double bound, Bits h, Bits t, bool is_facet) {
        const auto i = static_cast<Eigen::Index>(size.size());
        sys.a.row(i) = row;
        sys.b[i] = bound;
        size.push_back(h.count());
        history.push_back(std::move(h));
        touched.push_back(std::move(t));
        facet.push_back(is_facet);
    }
    void finish() {
        sys.a.conservativeResize(static_cast<Eigen::Index>(size.size()), Eigen::NoChange);
        sys.b.conservativeResize(static_cast<Eigen::Index>(size.size()));
    }
};

inline Generated substitute_tracked(const TrackedSystem& t, const Pivot& pivot, int col) {
    const LinearSystem& sys = t.sys;
    const Eigen::RowVectorXd e = sys.a.row(pivot.row);
    const double eb = sys.b[pivot.row];
    const double ec = e[col];
    Generated out(sys.labels);
    out.reserve(static_cast<std::size_t>(sys.rows() - 2), sys.vars());
    for (int r = 0; r < sys.rows(); ++r) {
        if (r == pivot.row || r == pivot.partner) continue;
        const double f = sys.a(r, col) / ec;
        Bits h = t.history[static_cast<std::size_t>(r)];
        Bits v = t.touched[static_cast<std::size_t>(r)];
        if (f != 0.0) {
            // a_r - f·e adds f times the partner row when f > 0.
            const int used = f > 0.0 ? pivot.partner : pivot.row;
            h |= t.history[static_cast<std::size_t>(used)];
            v |= t.touched[static_cast<std::size_t>(used)];
        }
        Eigen::RowVectorXd row = sys.a.row(r) - f * e;
        double bound = sys.b[r] - f * eb;
        row[col] = 0.0;
        if (!normalize_row(row, bound, 1.0 + std::abs(f))) {
            if (bound < -1e-9 * (1.0 + std::abs(f))) throw Error(ErrorKind::InfeasibleSystem, "substitution leaves 0 <= negative");
            continue;
        }
        out.push(row, bound, std::move(h), std::move(v), true);
    }
    out.finish();
    return out;
}

inline Generated fme_tracked(const TrackedSystem& t, int v, bool filter) {
    const LinearSystem& sys = t.sys;
    std::vector<int> I, J, K;
    for (int r = 0; r < sys.rows(); ++r) {
        const double c = sys.a(r, v);
        const double scale = sys.a.row(r).cwiseAbs().maxCoeff();
        if (std::abs(c) <= kZeroCoefficient * std::max(scale, 1.0)) {
            I.push_back(r);
        } else {
            (c < 0.0 ? J : K).push_back(r);
        }
    }
    Generated out(sys.labels);
    out.reserve(I.size() + J.size() * K.size(), sys.vars());
    for (int r : I) {
        Eigen::RowVectorXd row = sys.a.row(r);
        row[v] = 0.0;
        out.push(row, sys.b[r], t.history[static_cast<std::size_t>(r)], t.touched[static_cast<std::size_t>(r)], true);
    }
    for (int j : J) {
        const double cj = -sys.a(j, v);
        for (int k : K) {
            Bits h = t.history[static_cast<std::size_t>(j)];
            h |= t.history[static_cast<std::size_t>(k)];
            Bits touched = t.touched[static_cast<std::size_t>(j)];
            touched |= t.touched[static_cast<std::size_t>(k)];
            const double ck = sys.a(k, v);
            Eigen::RowVectorXd row = sys.a.row(j) / cj + sys.a.row(k) / ck;
            double bound = sys.b[j] / cj + sys.b[k] / ck;
            row[v] = 0.0;
            if (!normalize_row(row, bound, 1.0 / cj + 1.0 / ck)) {
                if (bound < -1e-9 * (1.0 / cj + 1.0 / ck)) throw Error(ErrorKind::InfeasibleSystem, "bounds on a variable cross");
                ++out.filtered;
                continue;
            }
            if (filter && h.count() > 1 + touched.count_outside(t.support_of(row))) {
                ++out.skipped;
                continue;
            }
            out.push(row, bound, std::move(h), std::move(touched), false);
        }
    }
    out.finish();
    return out;
}

/// Prunes the generated rows and drops column `col`.
inline TrackedSystem prune_tracked(const Generated& g, const TrackedSystem& prev, int col, const RedundancyOptions& opt,
                                   RedundancyStats& stats) {
    const std::vector<int> keep = prune(g.sys, opt, &stats, &g.size, &g.facet);
    TrackedSystem out;
    LinearSystem rows = select_rows(g.sys, keep);
    for (int r = 0; r < rows.rows(); ++r) normalize_row(rows.a.row(r), rows.b[r]);
    out.sys = without_column(rows, col);
    for (int r : keep) {
        out.history.push_back(g.history[static_cast<std::size_t>(r)]);
        out.touched.push_back(g.touched[static_cast<std::size_t>(r)]);
    }
    out.column = prev.column;
    out.column.erase(out.column.begin() + col);
    out.original_vars = prev.original_vars;
    out.flat_start = prev.flat_start;
    return out;
}

} // namespace detail

/// Eliminates every variable outside `keep`, pruning after each step, and
/// returns the system over `keep` (in that order).
inline LinearSystem project_to_plane(const LinearSystem& input, const std::vector<std::string>& keep,
                                     EliminationReport* report = nullptr, const ProjectionOptions& opt = {}) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    for (const std::string& k : keep) input.index_of(k);
    auto kept = [&](const std::string& name) { return std::find(keep.begin(), keep.end(), name) != keep.end(); };
    for (const std::string& name : opt.order) {
        input.index_of(name);
        if (kept(name)) throw Error(ErrorKind::BadParameter, "elimination order names kept variable '" + name + "'");
    }

    EliminationReport rep;
    rep.initial_rows = input.rows();
    detail::TrackedSystem t;
    {
        const std::vector<int> rows = detail::prune(input, opt.redundancy, nullptr);
        t.sys = detail::select_rows(input, rows);
        t.original_vars = input.vars();
        for (int j = 0; j < input.vars(); ++j) t.column.push_back(j);
        for (int r = 0; r < t.sys.rows(); ++r) detail::normalize_row(t.sys.a.row(r), t.sys.b[r]);
        t.history.resize(rows.size());
        t.touched.resize(rows.size());
        t.restart_history(opt.redundancy.tol);
    }
    rep.initial_rows_after_pruning = t.sys.rows();

    std::size_t scripted = 0;
    while (t.sys.vars() > static_cast<int>(keep.size())) {
        const LinearSystem& sys = t.sys;
        const auto t_step = clock::now();
        const std::vector<int> partner =
            opt.use_equalities ? detail::equality_partners(sys, opt.redundancy.tol) : std::vector<int>(sys.rows(), -1);

        int col = -1;
        detail::Pivot pivot;
        if (!opt.order.empty()) {
            while (scripted < opt.order.size() &&
                   std::find(sys.labels.begin(), sys.labels.end(), opt.order[scripted]) == sys.labels.end()) {
                ++scripted;
            }
            if (scripted == opt.order.size()) {
                for (int j = 0; j < sys.vars() && col < 0; ++j) {
                    if (!kept(sys.labels[j])) col = j;
                }
            } else {
                col = sys.index_of(opt.order[scripted++]);
            }
            if (opt.use_equalities) pivot = detail::equality_pivot(sys, partner, col);
        } else {
            // Prefer a substitution (largest pivot first), then the smallest |J|·|K|.
            double best_pivot = 0.0;
            for (int j = 0; j < sys.vars() && opt.use_equalities; ++j) {
                if (kept(sys.labels[j])) continue;
                const detail::Pivot p = detail::equality_pivot(sys, partner, j);
                if (p.row >= 0 && std::abs(sys.a(p.row, j)) > best_pivot) {
                    best_pivot = std::abs(sys.a(p.row, j));
                    col = j;
                    pivot = p;
                }
            }
            if (col < 0) {
                long long best_cost = -1;
                for (int j = 0; j < sys.vars(); ++j) {
                    if (kept(sys.labels[j])) continue;
                    long long lower = 0, upper = 0;
                    for (int r = 0; r < sys.rows(); ++r) {
                        const double c = sys.a(r, j);
                        if (std::abs(c) <= detail::kZeroCoefficient) continue;
                        (c < 0.0 ? lower : upper) += 1;
                    }
                    const long long cost = lower * upper;
                    if (best_cost < 0 || cost < best_cost) {
                        best_cost = cost;
                        col = j;
                    }
                }
            }
        }

        EliminationStep step;
        step.variable = sys.labels[col];
        step.rows_before = sys.rows();
        step.substitution = pivot.row >= 0;
        const detail::Generated g = step.substitution ? detail::substitute_tracked(t, pivot, col)
                                                      : detail::fme_tracked(t, col, opt.history_filter && !t.flat_start);
        step.rows_generated = g.sys.rows() + g.filtered;
        step.rows_skipped = g.skipped;
        RedundancyStats stats;
        t = detail::prune_tracked(g, t, col, opt.redundancy, stats);
        if (step.substitution) t.restart_history(opt.redundancy.tol);
        step.redundancy_removed = stats.removed + g.filtered;
        step.rows_after = t.sys.rows();
        step.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - t_step).count();
        rep.order.push_back(step.variable);
        rep.steps.push_back(step);
        if (opt.on_step) opt.on_step(step);
    }

    // Reorder columns to match `keep`.
    LinearSystem out(keep);
    out.a.resize(t.sys.rows(), static_cast<Eigen::Index>(keep.size()));
    out.b = t.sys.b;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.a.col(static_cast<Eigen::Index>(k)) = t.sys.a.col(t.sys.index_of(keep[k]));
    }
    rep.final_rows = out.rows();
    rep.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - t_start).count();
    if (report) *report = rep;
    return out;
}

} // namespace flexfor
