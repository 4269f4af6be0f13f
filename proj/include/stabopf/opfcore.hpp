#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabopf/netmodel.hpp"
#include "stabopf/sqp.hpp"
#include "stabopf/stabcert.hpp"

namespace stabopf {

// Per-inverter cost a + b P + c P^2 + d Q^2 (p.u. quantities), inverter
// order as in Network::inverter_indices(). eta_q, when set, overrides d
// with eta_q * c.
struct CostModel {
    std::vector<double> a, b, c, d;
    std::optional<double> eta_q;

    std::size_t size() const noexcept { return c.size(); }
    double d_eff(std::size_t k) const { return eta_q ? *eta_q * c[k] : d[k]; }
    static CostModel from_network(const Network& net);
};

struct GenLimits {
    Eigen::VectorXd pmin, pmax, qmin, qmax;
    static GenLimits from_network(const Network& net);
};

struct OpfOptions {
    std::optional<double> fixed_ref_voltage;
};

struct DecisionVector {
    Eigen::VectorXd pg;
    Eigen::VectorXd qg;
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
};

enum class InequalityKind { p_upper, p_lower, q_upper, q_lower, v_upper, v_lower, branch_flow, stability };

struct InequalityTag {
    InequalityKind kind;
    std::size_t index;  // inverter, bus, branch or stability constraint number
};

std::string describe(const InequalityTag& tag, const Network& net);

class OpfProblem {
  public:
    Network net;
    SusceptanceMatrix B;
    CostModel cost;
    std::optional<StabilityConstraintSet> stab;
    GenLimits limits;
    OpfOptions options;

    std::vector<std::size_t> gen_bus;   // bus index of inverter k
    std::vector<std::size_t> stab_bus;  // bus index of reduced bus r
    std::vector<InequalityTag> ineq;    // operational first, stability last
    std::size_t n_operational = 0;
    std::vector<Eigen::Index> free_index;  // full positions left free

    std::size_t n_gen() const noexcept { return gen_bus.size(); }
    std::size_t n_bus() const noexcept { return net.n_bus(); }
    std::size_t n_stab() const noexcept { return stab ? stab->size() : 0; }
    Eigen::Index n_full() const noexcept { return static_cast<Eigen::Index>(2 * n_gen() + 2 * n_bus()); }
    std::size_t ref_index() const { return net.ref_index(); }

    // Full vector layout: [P_G, Q_G, V, theta].
    Eigen::VectorXd pack(const DecisionVector& x) const;
    DecisionVector unpack(const Eigen::VectorXd& full) const;
    // Free coordinates exclude theta_ref and, when fixed, V_ref.
    Eigen::VectorXd to_free(const DecisionVector& x) const;
    DecisionVector from_free(const Eigen::VectorXd& z) const;

    double objective(const DecisionVector& x) const;
    Eigen::VectorXd objective_gradient(const DecisionVector& x) const;  // full layout
};

// Throws std::invalid_argument on inconsistent data, including
// "stability set built from a different network".
OpfProblem assemble(const Network& net, const SusceptanceMatrix& B, const CostModel& cost, const StabilityConstraintSet* stab,
                    const GenLimits& limits, const OpfOptions& options = {});

// Equalities g = (g_P, g_Q) with g_P = P_D + P_net - P_G and
// g_Q = Q_D + Q_net - Q_G, so lambda_P is the marginal cost of active power.
// Inequalities q (operational) and h (stability) are written <= 0.
// Jacobians are with respect to the full layout.
struct ConstraintBundle {
    Eigen::VectorXd g;
    Eigen::VectorXd q;
    Eigen::VectorXd h;
    Eigen::MatrixXd dg;
    Eigen::MatrixXd dq;
    Eigen::MatrixXd dh;
};

ConstraintBundle evaluate_constraints(const OpfProblem& prob, const DecisionVector& x, bool derivatives = true);

enum class OpfStatus { optimal, infeasible, max_iter, degenerate };
std::string to_string(OpfStatus s);

struct StartDiagnostics {
    std::size_t start = 0;
    SqpStatus status = SqpStatus::failed;
    double objective = 0.0;
    double kkt_residual = 0.0;
    double feasibility = 0.0;
    std::size_t iterations = 0;
    std::string message;
};

struct OpfSolution {
    DecisionVector x;
    double objective = 0.0;
    Eigen::VectorXd lambda_p;
    Eigen::VectorXd lambda_q;
    Eigen::VectorXd nu;        // operational inequalities
    Eigen::VectorXd mu_stab;   // stability constraints
    Eigen::VectorXd q_values;
    Eigen::VectorXd h_values;
    std::vector<std::size_t> active_set;  // into OpfProblem::ineq, |value| <= binding_tol
    double kkt_residual = 0.0;       // scaled stationarity/feasibility/complementarity
    double stationarity_abs = 0.0;   // unscaled stationarity in objective units
    double feasibility = 0.0;
    double complementarity = 0.0;
    double condition = 1.0;          // active-gradient condition estimate
    bool acceptable_only = false;    // converged to the acceptable tolerance only
    OpfStatus status = OpfStatus::infeasible;
    std::size_t best_start = 0;
    std::vector<StartDiagnostics> starts;

    bool ok() const noexcept { return status == OpfStatus::optimal || status == OpfStatus::degenerate; }
};

struct SolveOptions {
    double tol = 1e-8;
    double acceptable_tol = 1e-6;
    std::size_t max_iter = 400;
    double tie_rel = 1e-9;
    double binding_tol = 1e-6;
};

DecisionVector flat_start(const OpfProblem& prob);
// Flat start followed by n_random seeded perturbations.
std::vector<DecisionVector> default_starts(const OpfProblem& prob, std::uint64_t seed = 1, std::size_t n_random = 8);

OpfSolution solve(const OpfProblem& prob, const std::vector<DecisionVector>& starts, const SolveOptions& options = {});

// Tie-break on a flat optimal set: re-solve from sol with objective
// f + weight * c^T x (c in the full layout), then polish with the true
// objective. Returns sol if the polished point is not optimal or is worse
// than sol by more than tie_rel.
OpfSolution refine_flat_optimum(const OpfProblem& prob, const OpfSolution& sol, const Eigen::VectorXd& c, double weight,
                                const SolveOptions& options = {});

// Direction -sum V: with a small weight, prefers higher voltages.
Eigen::VectorXd voltage_tilt(const OpfProblem& prob);

// Lagrangian gradient in the full layout for the given duals.
Eigen::VectorXd lagrangian_gradient(const OpfProblem& prob, const DecisionVector& x, const OpfSolution& duals);

struct SweepOptions {
    bool warm_start = true;
    SolveOptions solve;
    std::function<std::vector<DecisionVector>(const OpfProblem&)> starts;  // default: default_starts
};

// Solves make(value) along a monotone axis. With warm starts, point k+1
// tries the solution of point k first. Per-point failures are kept in the
// returned solutions.
std::vector<OpfSolution> solve_sweep(const std::function<OpfProblem(double)>& make, const std::vector<double>& axis,
                                     const SweepOptions& options = {});

}  // namespace stabopf
