#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stabopf {

// min 0.5 x^T H x + g^T x  s.t.  Ae x = be,  Ai x <= bi.
// H must be symmetric positive definite.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd Ae;
    Eigen::VectorXd be;
    Eigen::MatrixXd Ai;
    Eigen::VectorXd bi;
};

enum class QpStatus { optimal, infeasible, max_iter, not_convex, dependent_equalities };

std::string to_string(QpStatus s);

// Multipliers follow L = f + y^T (Ae x - be) + mu^T (Ai x - bi), mu >= 0,
// so H x + g + Ae^T y + Ai^T mu = 0 at the solution.
struct QpResult {
    QpStatus status = QpStatus::infeasible;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd mu;
    std::vector<std::size_t> active;  // inequality rows in the final working set
    double objective = 0.0;
    std::size_t iterations = 0;
};

// Goldfarb-Idnani dual active-set method. max_iter = 0 picks a default
// proportional to the problem size.
QpResult solve_qp(const QpProblem& qp, std::size_t max_iter = 0);

}  // namespace stabopf
