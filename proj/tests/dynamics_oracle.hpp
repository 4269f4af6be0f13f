#pragma once

// Droop vector field and random samplers shared by the dynamics checks.

#include <random>
#include <vector>

#include "oracles.hpp"
#include "stabopf/dynamics.hpp"

namespace oracle {

using stabopf::InverterParams;
using stabopf::OperatingPoint;

// Right-hand side of the droop dynamics with setpoints frozen at op.
inline Eigen::VectorXd vector_field(const Eigen::MatrixXd& B, const std::vector<InverterParams>& prm, const OperatingPoint& op,
                             const Eigen::VectorXd& state) {
    const Eigen::Index n = B.rows();
    Eigen::VectorXd p0, q0, p, q;
    complex_injections(B, op.v, op.theta, p0, q0);
    const Eigen::VectorXd th = op.theta + state.head(n);
    const Eigen::VectorXd dw = state.segment(n, n);
    const Eigen::VectorXd dv = state.tail(n);
    complex_injections(B, op.v + dv, th, p, q);
    Eigen::VectorXd f(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& c = prm[static_cast<std::size_t>(i)];
        f(i) = c.omega_b * dw(i);
        f(n + i) = -dw(i) / c.tau_p + c.m_p * c.beta_p / c.tau_p * (p0(i) - p(i));
        f(2 * n + i) = -dv(i) / c.tau_q + c.m_q * c.beta_q / c.tau_q * (q0(i) - q(i));
    }
    return f;
}

inline std::vector<InverterParams> random_params(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.05, 5.0);
    std::vector<InverterParams> out(n);
    for (auto& p : out) {
        p.m_p = u(rng);
        p.m_q = u(rng);
        p.tau_p = 0.02 + 0.1 * u(rng);
        p.tau_q = 0.02 + 0.1 * u(rng);
        p.beta_p = u(rng);
        p.beta_q = u(rng);
    }
    return out;
}

inline OperatingPoint random_op(std::mt19937& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> uv(0.85, 1.15), ut(-0.6, 0.6);
    OperatingPoint op{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        op.v(i) = uv(rng);
        op.theta(i) = i == 0 ? 0.0 : ut(rng);
    }
    return op;
}

}  // namespace oracle
