#pragma once

// A labelled inequality system  A x <= b.

#include "flexfor/errors.hpp"

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace flexfor {

struct LinearSystem {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    std::vector<std::string> labels;

    LinearSystem() = default;
    explicit LinearSystem(std::vector<std::string> names)
        : a(0, static_cast<Eigen::Index>(names.size())), b(0), labels(std::move(names)) {}
    LinearSystem(Eigen::MatrixXd a_, Eigen::VectorXd b_, std::vector<std::string> names)
        : a(std::move(a_)), b(std::move(b_)), labels(std::move(names)) {
        if (a.rows() != b.size() || a.cols() != static_cast<Eigen::Index>(labels.size())) {
            throw Error(ErrorKind::DimensionMismatch, "system matrix, bounds and labels disagree");
        }
    }

    int rows() const { return static_cast<int>(a.rows()); }
    int vars() const { return static_cast<int>(a.cols()); }

    int index_of(std::string_view name) const {
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == name) return static_cast<int>(j);
        }
        throw Error(ErrorKind::UnknownVariable, "unknown variable '" + std::string(name) + "'");
    }

    void append(const Eigen::RowVectorXd& row, double bound) {
        if (row.size() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "row length differs from variable count");
        a.conservativeResize(a.rows() + 1, Eigen::NoChange);
        b.conservativeResize(b.size() + 1);
        a.row(a.rows() - 1) = row;
        b[b.size() - 1] = bound;
    }

    void append(const LinearSystem& other) {
        if (other.a.cols() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "appending rows of another width");
        const Eigen::Index m = a.rows();
        a.conservativeResize(m + other.a.rows(), Eigen::NoChange);
        b.conservativeResize(m + other.b.size());
        a.bottomRows(other.a.rows()) = other.a;
        b.tail(other.b.size()) = other.b;
    }

    /// Largest violation max(A x - b), or -inf for a system without rows.
    double max_violation(const Eigen::VectorXd& x) const {
        if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
        return (a * x - b).maxCoeff();
    }

    bool satisfied(const Eigen::VectorXd& x, double tol = 0.0) const { return max_violation(x) <= tol; }
};

} // namespace flexfor
