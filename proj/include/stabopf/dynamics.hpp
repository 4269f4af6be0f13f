#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabopf/netmodel.hpp"

namespace stabopf {

inline constexpr double kPi = 3.14159265358979323846;

// Droop and filter constants of one grid-forming inverter.
struct InverterParams {
    double m_p = 6.0;
    double m_q = 1.0;
    double tau_p = 0.1;
    double tau_q = 0.1;
    double beta_p = 1.0;
    double beta_q = 1.0;
    double omega_b = 2.0 * kPi * 60.0;

    // Throws std::invalid_argument unless every field is finite and > 0.
    void validate() const;
};

// n copies of `base` with m_q overridden.
std::vector<InverterParams> uniform_params(std::size_t n, double m_q, const InverterParams& base = {});

// Steady state on the reduced network. Setpoints P0, Q0, V0 vanish under
// differentiation and are deliberately absent.
struct OperatingPoint {
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
};

struct AngleViolation {
    std::size_t i = 0;
    std::size_t j = 0;
    double difference = 0.0;
};

// Reduced edges with |theta_i - theta_j| >= pi/2.
std::vector<AngleViolation> angle_violations(const ReducedNetwork& red, const OperatingPoint& op);

// Lossless injections P_net, Q_net for a symmetric susceptance matrix:
//   P_i = -sum_j V_i V_j B_ij sin(theta_i - theta_j)
//   Q_i = V_i^2 B_ii + sum_{j != i} V_i V_j B_ij cos(theta_i - theta_j)
struct Injections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

Injections injections(const Eigen::MatrixXd& B, const Eigen::VectorXd& v, const Eigen::VectorXd& theta);

struct InjectionJacobian {
    Eigen::MatrixXd dp_dtheta;
    Eigen::MatrixXd dp_dv;
    Eigen::MatrixXd dq_dtheta;
    Eigen::MatrixXd dq_dv;
};

InjectionJacobian injection_jacobian(const Eigen::MatrixXd& B, const Eigen::VectorXd& v, const Eigen::VectorXd& theta);
InjectionJacobian injection_jacobian(const ReducedNetwork& red, const OperatingPoint& op);

// Linearized inverter dynamics, state order (theta, d_omega, d_V).
struct StateMatrix {
    Eigen::MatrixXd A;
    std::size_t n = 0;
    std::vector<AngleViolation> angle_violations;
};

StateMatrix linearize(const ReducedNetwork& red, const std::vector<InverterParams>& params, const OperatingPoint& op);

}  // namespace stabopf
