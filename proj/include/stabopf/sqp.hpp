#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stabopf {

// Smooth NLP: min f(x) s.t. ce(x) = 0, ci(x) <= 0.
struct NlpEvaluation {
    double f = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd ce;
    Eigen::MatrixXd Je;
    Eigen::VectorXd ci;
    Eigen::MatrixXd Ji;
};

class Nlp {
  public:
    virtual ~Nlp() = default;
    virtual Eigen::Index n_vars() const = 0;
    virtual Eigen::Index n_eq() const = 0;
    virtual Eigen::Index n_ineq() const = 0;
    // Values always; gradients and Jacobians when `derivatives` is set.
    virtual void evaluate(const Eigen::VectorXd& x, NlpEvaluation& out, bool derivatives) const = 0;
};

struct SqpOptions {
    double tol = 1e-8;
    double acceptable_tol = 1e-6;
    std::size_t max_iter = 400;
    double step_box = 0.5;  // infinity-norm cap applied when a QP step exceeds it
    double rank_tol = 1e-10;  // relative singular value cut for the active gradients
    double active_tol = 1e-6;
};

enum class SqpStatus { optimal, acceptable, infeasible, max_iter, degenerate, failed };

std::string to_string(SqpStatus s);

// Multipliers follow L = f + y^T ce + mu^T ci with mu >= 0, in the units of f.
// Residuals are measured on the internally scaled objective sigma * f.
struct SqpResult {
    SqpStatus status = SqpStatus::failed;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd mu;
    double f = 0.0;
    double objective_scale = 1.0;  // sigma
    double stationarity = 0.0;
    double feasibility = 0.0;
    double complementarity = 0.0;
    double kkt_residual = 0.0;  // max of the three scaled residuals
    double active_condition = 1.0;  // sigma_max / sigma_min of active gradients
    std::vector<std::size_t> active_ineq;
    std::size_t iterations = 0;
    std::string message;
};

SqpResult solve_sqp(const Nlp& nlp, const Eigen::VectorXd& x0, const SqpOptions& options = {});

}  // namespace stabopf
