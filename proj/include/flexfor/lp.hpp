#pragma once

// Dense linear programming for small inequality systems.
//
// Problems have the form  maximize c·x  subject to  A x <= b,  x free.
// The number of variables is small (tens) while the number of rows can
// reach the thousands, so the solver works on the dual
//
//     minimize b·y  subject to  Aᵀ y = c,  y >= 0
//
// whose basis has one column per primal variable. The primal solution is
// read back from the simplex multipliers of the dual equality rows.

#include "flexfor/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace flexfor::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Options {
    double pivot_tol = 1e-9;
    double cost_tol = 1e-10;
    double feasibility_tol = 1e-9;
    /// Consecutive degenerate pivots before switching to Bland's rule.
    int degenerate_limit = 50;
    /// Pivots between refactorizations of the basis inverse.
    int refactor_interval = 50;
};

struct Result {
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;

    bool optimal() const { return status == Status::Optimal; }
};

namespace detail {

// Revised simplex on the dual. Columns are the primal rows a_j (cost b_j)
// plus one artificial column sign(c_i)·e_i per primal variable. The basis has
// one column per primal variable, and its simplex multipliers are the primal
// point x; a nonbasic row's reduced cost is its primal slack b_j - a_j·x.
class DualSimplex {
public:
    DualSimplex(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Options& options)
        : n_(static_cast<int>(A.cols())), m_(static_cast<int>(A.rows())), options_(options), a_(A), b_(b), c_(c),
          sign_(n_), norm_(m_), basis_(n_), in_basis_(static_cast<std::size_t>(m_ + n_), false) {
        for (int i = 0; i < n_; ++i) {
            sign_[i] = c[i] < 0.0 ? -1.0 : 1.0;
            basis_[i] = m_ + i;
            in_basis_[static_cast<std::size_t>(m_ + i)] = true;
        }
        for (int j = 0; j < m_; ++j) norm_[j] = std::max(a_.row(j).norm(), 1e-300);
        max_iterations_ = 50 * (n_ + m_) + 1000;
        refactor();
    }

    // Returns false if the dual is infeasible.
    bool phase_one(double c_scale) {
        phase_ = 1;
        const double tol = options_.feasibility_tol * (1.0 + c_scale);
        if (artificial_sum() > tol) {
            if (!iterate(tol)) throw Error(ErrorKind::NumericalFailure, "unbounded phase-one problem");
        }
        if (artificial_sum() > tol) return false;
        drive_out_artificials();
        return true;
    }

    // Returns false if the dual is unbounded (the primal is infeasible).
    bool phase_two() {
        phase_ = 2;
        return iterate(0.0);
    }

    Eigen::VectorXd primal() const { return prices(); }
    int iterations() const { return iterations_; }

private:
    bool artificial(int col) const { return col >= m_; }

    double cost(int col) const {
        if (phase_ == 1) return artificial(col) ? 1.0 : 0.0;
        return artificial(col) ? 0.0 : b_[col];
    }

    Eigen::VectorXd column(int col) const {
        if (!artificial(col)) return a_.row(col).transpose();
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
        e[col - m_] = sign_[col - m_];
        return e;
    }

    void refactor() {
        Eigen::MatrixXd basis(n_, n_);
        for (int k = 0; k < n_; ++k) basis.col(k) = column(basis_[k]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
        binv_ = lu.inverse();
        y_ = binv_ * c_;
        for (int k = 0; k < n_; ++k) {
            if (y_[k] < 0.0 && y_[k] > -options_.feasibility_tol) y_[k] = 0.0;
        }
        since_refactor_ = 0;
    }

    double artificial_sum() const {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) {
            if (artificial(basis_[k])) s += y_[k];
        }
        return s;
    }

    // Simplex multipliers of the current basis.
    Eigen::VectorXd prices() const {
        Eigen::VectorXd cb(n_);
        for (int k = 0; k < n_; ++k) cb[k] = cost(basis_[k]);
        return binv_.transpose() * cb;
    }

    // Returns false on an unbounded direction.
    bool iterate(double stop_objective) {
        int degenerate = 0;
        bool bland = false;
        while (true) {
            if (phase_ == 1 && artificial_sum() <= stop_objective) return true;
            const Eigen::VectorXd pi = prices();
            const Eigen::VectorXd api = a_ * pi;

            // Pricing on reduced costs scaled by column norm.
            int entering = -1;
            double best = -options_.cost_tol;
            const int columns = phase_ == 1 ? m_ + n_ : m_;
            for (int j = 0; j < columns; ++j) {
                if (in_basis_[static_cast<std::size_t>(j)]) continue;
                double d;
                if (artificial(j)) {
                    d = cost(j) - sign_[j - m_] * pi[j - m_];
                } else {
                    d = (cost(j) - api[j]) / norm_[j];
                }
                if (d < best) {
                    entering = j;
                    if (bland) break;
                    best = d;
                }
            }
            if (entering < 0) return true;

            const Eigen::VectorXd alpha = binv_ * column(entering);
            const double scale = artificial(entering) ? 1.0 : norm_[entering];
            const double piv_tol = options_.pivot_tol * scale;
            // Harris ratio test: widest admissible step, then largest pivot.
            double bound = std::numeric_limits<double>::infinity();
            for (int k = 0; k < n_; ++k) {
                if (alpha[k] > piv_tol) {
                    bound = std::min(bound, (std::max(y_[k], 0.0) + options_.feasibility_tol) / alpha[k]);
                }
            }
            if (!std::isfinite(bound)) return false;
            int leaving = -1;
            double best_alpha = 0.0, best_ratio = std::numeric_limits<double>::infinity();
            for (int k = 0; k < n_; ++k) {
                if (alpha[k] <= piv_tol) continue;
                const double ratio = std::max(y_[k], 0.0) / alpha[k];
                if (ratio > bound) continue;
                bool take;
                if (bland) {
                    take = leaving < 0 || ratio < best_ratio - 1e-12 ||
                           (ratio <= best_ratio + 1e-12 && basis_[k] < basis_[leaving]);
                } else {
                    take = alpha[k] > best_alpha;
                }
                if (take) {
                    leaving = k;
                    best_alpha = alpha[k];
                    best_ratio = ratio;
                }
            }
            const double theta = std::max(y_[leaving], 0.0) / alpha[leaving];
            if (theta <= 1e-12) {
                if (++degenerate > options_.degenerate_limit) bland = true;
            } else {
                degenerate = 0;
            }
            pivot(leaving, entering, alpha, theta);
            if (++iterations_ > max_iterations_) {
                throw Error(ErrorKind::NumericalFailure, "simplex iteration limit exceeded");
            }
        }
    }

    void pivot(int r, int entering, const Eigen::VectorXd& alpha, double theta) {
        y_ -= theta * alpha;
        y_[r] = theta;
        for (int k = 0; k < n_; ++k) {
            if (y_[k] < 0.0) y_[k] = 0.0;
        }
        const Eigen::RowVectorXd prow = binv_.row(r) / alpha[r];
        for (int k = 0; k < n_; ++k) {
            if (k != r && alpha[k] != 0.0) binv_.row(k) -= alpha[k] * prow;
        }
        binv_.row(r) = prow;
        in_basis_[static_cast<std::size_t>(basis_[r])] = false;
        in_basis_[static_cast<std::size_t>(entering)] = true;
        basis_[r] = entering;
        if (++since_refactor_ >= options_.refactor_interval) refactor();
    }

    void drive_out_artificials() {
        for (int r = 0; r < n_; ++r) {
            if (!artificial(basis_[r])) continue;
            const Eigen::VectorXd row = a_ * binv_.row(r).transpose();
            int best = -1;
            double best_abs = 0.0;
            for (int j = 0; j < m_; ++j) {
                if (in_basis_[static_cast<std::size_t>(j)]) continue;
                const double v = std::abs(row[j]) / norm_[j];
                if (v > best_abs) {
                    best = j;
                    best_abs = v;
                }
            }
            // A row with no usable structural entry is a dependent equality;
            // its artificial stays basic at zero.
            if (best < 0 || best_abs <= 1e-9) continue;
            const Eigen::VectorXd alpha = binv_ * column(best);
            pivot(r, best, alpha, 0.0);
        }
        refactor();
    }

    int n_;
    int m_;
    Options options_;
    const Eigen::MatrixXd& a_;
    const Eigen::VectorXd& b_;
    const Eigen::VectorXd& c_;
    std::vector<double> sign_;
    std::vector<double> norm_;
    std::vector<int> basis_;
    std::vector<bool> in_basis_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd y_;
    int phase_ = 1;
    int since_refactor_ = 0;
    int iterations_ = 0;
    int max_iterations_ = 0;
};

} // namespace detail

/// maximize c·x subject to A x <= b with x unrestricted in sign.
inline Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       const Options& options = {}) {
    if (A.cols() != c.size() || A.rows() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch, "lp::maximize: inconsistent dimensions");
    }
    Result result;
    const auto n = A.cols();
    if (n == 0) {
        const bool feasible = A.rows() == 0 || b.minCoeff() >= -options.feasibility_tol;
        result.status = feasible ? Status::Optimal : Status::Infeasible;
        result.x = Eigen::VectorXd(0);
        return result;
    }

    detail::DualSimplex tableau(c, A, b, options);
    const double c_scale = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
    if (!tableau.phase_one(c_scale)) {
        // Dual infeasible: the primal is either unbounded or infeasible.
        const Result probe = maximize(Eigen::VectorXd::Zero(n), A, b, options);
        result.status = probe.status == Status::Optimal ? Status::Unbounded : Status::Infeasible;
        result.iterations = tableau.iterations() + probe.iterations;
        if (probe.status == Status::Optimal) result.x = probe.x;
        return result;
    }
    if (!tableau.phase_two()) {
        result.status = Status::Infeasible;
        result.iterations = tableau.iterations();
        return result;
    }
    result.status = Status::Optimal;
    result.x = tableau.primal();
    result.value = c.dot(result.x);
    result.iterations = tableau.iterations();
    return result;
}

/// Some point of {x : A x <= b}, or nothing when the set is empty.
inline std::optional<Eigen::VectorXd> feasible_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                                     const Options& options = {}) {
    const Result r = maximize(Eigen::VectorXd::Zero(A.cols()), A, b, options);
    if (r.status != Status::Optimal) return std::nullopt;
    return r.x;
}

struct Ball {
    Eigen::VectorXd center;
    double radius = 0.0;
};

/// Largest ball inside {A x <= b}, radius capped at `radius_cap`. Rows flagged
/// in `equality` (one half of an opposing pair, the other half included too)
/// are kept without a radius term, so the ball lives in their affine hull.
inline std::optional<Ball> chebyshev_center(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                            const std::vector<bool>& equality, double radius_cap,
                                            const Options& options = {}) {
    const auto m = A.rows();
    const auto n = A.cols();
    Eigen::MatrixXd Ac(m + 1, n + 1);
    Eigen::VectorXd bc(m + 1);
    Ac.topLeftCorner(m, n) = A;
    for (Eigen::Index i = 0; i < m; ++i) {
        const bool eq = !equality.empty() && equality[static_cast<std::size_t>(i)];
        Ac(i, n) = eq ? 0.0 : A.row(i).norm();
    }
    bc.head(m) = b;
    Ac.row(m).setZero();
    Ac(m, n) = 1.0;
    bc[m] = radius_cap;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
    c[n] = 1.0;
    const Result r = maximize(c, Ac, bc, options);
    if (r.status != Status::Optimal || r.x[n] < -options.feasibility_tol) return std::nullopt;
    return Ball{r.x.head(n), std::max(r.x[n], 0.0)};
}

} // namespace flexfor::lp
