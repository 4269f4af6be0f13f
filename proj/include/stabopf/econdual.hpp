#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabopf/opfcore.hpp"

namespace stabopf {

struct NsspPair {
    std::size_t constraint = 0;  // index into the stability set
    std::size_t i = 0;           // reduced indices
    std::size_t j = 0;
    double lambda = 0.0;
    bool binding = false;
};

// nssp(r) is the plain sum of lambda over the pairs owned by reduced bus r.
struct NsspReport {
    std::vector<int> bus_id;
    Eigen::VectorXd nssp;
    std::vector<std::vector<NsspPair>> pairs;
    std::vector<std::size_t> n_binding;
};

NsspReport compute_nssp(const OpfSolution& sol, const StabilityConstraintSet& set, double binding_tol = 1e-6);
// Columns bus,nssp,n_binding_pairs.
void write_nssp_csv(const NsspReport& report, const std::filesystem::path& path);

struct MaxFormMultipliers {
    Eigen::VectorXd lambda;  // per reduced bus, equal to the split sum
    // (j, alpha_ij) for every pair with positive multiplier; empty when lambda = 0.
    std::vector<std::vector<std::pair<std::size_t, double>>> weights;
};

MaxFormMultipliers aggregate_max_multiplier(const OpfSolution& sol, const StabilityConstraintSet& set);

// Stationarity residual (free coordinates, objective units) of the max-form
// problem with per-bus multipliers and the convex-combination subgradients.
double max_form_stationarity(const OpfProblem& prob, const OpfSolution& sol, const MaxFormMultipliers& agg);

// Constraint l has |h_l| <= binding_tol while every other inequality has
// slack above inactive_slack.
bool independently_binding(const OpfSolution& sol, std::size_t constraint, double binding_tol = 1e-6, double inactive_slack = 1e-4);

enum class Verdict { pass, fail, not_applicable };
std::string to_string(Verdict v);

struct Theorem1Check {
    Verdict verdict = Verdict::not_applicable;
    std::string reason;
    std::vector<std::size_t> binding;  // stability constraints with |h| <= binding_tol
    double max_abs_mu = 0.0;           // over binding stability constraints
    double lambda_p_spread = 0.0;      // max - min of lambda_P
    double max_abs_lambda_q = 0.0;
    double pli_distance = 0.0;         // min over the simplex of |sum c_l alpha_l|
};

struct Theorem1Options {
    double inactive_slack = 1e-4;
    double binding_tol = 1e-6;
    double mu_tol = 1e-6;
    double lambda_tol = 1e-6;
    double pli_tol = 1e-8;
};

Theorem1Check verify_theorem1(const OpfSolution& sol, const OpfProblem& prob, const Theorem1Options& options = {});

class StationarityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct StationarityCheck {
    Eigen::MatrixXd basis;  // orthonormal tangent basis, free coordinates
    std::size_t tangent_basis_dim = 0;
    std::size_t n_active_operational = 0;  // rows added to the equality Jacobian
    Eigen::VectorXd projected_objective_gradient;
    Eigen::VectorXd projected_constraint_gradient;
    double reduced_gradient_norm = 0.0;
    double implied_mu = 0.0;
    double residual = 0.0;  // |Z^T grad J + mu Z^T grad h|
    std::optional<double> min_curvature;  // SOSC probe over sampled critical directions
    bool sosc_positive = false;
};

struct StationarityOptions {
    double rank_rel_tol = 1e-8;
    double binding_tol = 1e-6;
    std::size_t sosc_directions = 20;  // 0 disables the probe
    std::uint64_t seed = 7;
};

// The tangent space is the null space of the equality Jacobian augmented
// with active operational inequalities. Throws StationarityError with
// "not independently binding" when another stability constraint is active,
// or a rank report for a rank-deficient Jacobian.
StationarityCheck verify_reduced_stationarity(const OpfSolution& sol, const OpfProblem& prob, std::size_t constraint,
                                              const StationarityOptions& options = {});

struct PositivePriceOptions {
    bool allow_reactive = true;  // false forces d = 0
    double c_floor = 1e-3;       // keeps the quadratic active-power costs strictly convex
    double residual_tol = 1e-8;
    std::optional<SolveOptions> resolve;  // re-solve check; default options when empty
};

struct PositivePriceResult {
    bool found = false;
    CostModel cost;  // with mu = 1 normalization
    double residual = 0.0;
    Eigen::VectorXd certificate;  // residual direction r with M^T r >= 0 on the bound set when not found
    std::string message;
    std::optional<OpfSolution> resolved;
    double resolved_mu = 0.0;
};

// Costs rho = (b, c, d) >= 0 making target reduced-stationary with mu_s = 1
// for the given stability constraint; constant terms are kept from prob.
PositivePriceResult find_positive_price_costs(const OpfProblem& prob, const DecisionVector& target, std::size_t constraint,
                                              const PositivePriceOptions& options = {});

struct MarginalPriceCheck {
    double mu = 0.0;
    double delta = 0.0;
    double predicted = 0.0;  // -mu * delta
    double actual = 0.0;     // J(Gamma + delta) - J(Gamma)
    double rel_error = 0.0;
    bool resolved_ok = false;
};

// Shifts one stability bound by delta and re-solves from sol and the default starts.
MarginalPriceCheck check_marginal_price(const OpfProblem& prob, const OpfSolution& sol, std::size_t constraint, double delta = 1e-4,
                                        const SolveOptions& options = {});
// Shifts Gamma_i of one reduced bus, i.e. every pair bound owned by it; the
// prediction uses the bus NSSP. Unlike single-pair shifts this is well
// defined when several pairs of the bus bind with non-unique multipliers.
MarginalPriceCheck check_bus_marginal_price(const OpfProblem& prob, const OpfSolution& sol, std::size_t bus, double delta = 1e-4,
                                            const SolveOptions& options = {});

}  // namespace stabopf
