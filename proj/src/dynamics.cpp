#include "stabopf/dynamics.hpp"

#include <cmath>

namespace stabopf {

void InverterParams::validate() const {
    const double fields[] = {m_p, m_q, tau_p, tau_q, beta_p, beta_q, omega_b};
    const char* names[] = {"m_p", "m_q", "tau_p", "tau_q", "beta_p", "beta_q", "omega_b"};
    for (std::size_t k = 0; k < 7; ++k) {
        if (!std::isfinite(fields[k]) || !(fields[k] > 0.0)) {
            throw std::invalid_argument(std::string("inverter parameter ") + names[k] + " must be positive");
        }
    }
}

std::vector<InverterParams> uniform_params(std::size_t n, double m_q, const InverterParams& base) {
    InverterParams p = base;
    p.m_q = m_q;
    p.validate();
    return std::vector<InverterParams>(n, p);
}

namespace {

void check_dims(const Eigen::MatrixXd& B, const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    if (B.rows() != B.cols() || v.size() != B.rows() || theta.size() != B.rows()) {
        throw std::invalid_argument("operating point dimension does not match the susceptance matrix");
    }
}

}  // namespace

std::vector<AngleViolation> angle_violations(const ReducedNetwork& red, const OperatingPoint& op) {
    check_dims(red.B, op.v, op.theta);
    std::vector<AngleViolation> out;
    for (std::size_t i = 0; i < red.size(); ++i) {
        for (std::size_t j : red.neighbors[i]) {
            if (j <= i) continue;
            const double d = op.theta(static_cast<Eigen::Index>(i)) - op.theta(static_cast<Eigen::Index>(j));
            if (std::abs(d) >= kPi / 2.0) out.push_back({i, j, d});
        }
    }
    return out;
}

Injections injections(const Eigen::MatrixXd& B, const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    check_dims(B, v, theta);
    const Eigen::Index n = B.rows();
    Injections out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.q(i) = v(i) * v(i) * B(i, i);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || B(i, j) == 0.0) continue;
            const double d = theta(i) - theta(j);
            const double w = v(i) * v(j) * B(i, j);
            out.p(i) -= w * std::sin(d);
            out.q(i) += w * std::cos(d);
        }
    }
    return out;
}

InjectionJacobian injection_jacobian(const Eigen::MatrixXd& B, const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    check_dims(B, v, theta);
    const Eigen::Index n = B.rows();
    InjectionJacobian J{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                        Eigen::MatrixXd::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        J.dq_dv(i, i) = 2.0 * v(i) * B(i, i);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || B(i, j) == 0.0) continue;
            const double d = theta(i) - theta(j);
            const double s = std::sin(d);
            const double c = std::cos(d);
            const double b = B(i, j);
            J.dp_dtheta(i, j) = v(i) * v(j) * b * c;
            J.dp_dtheta(i, i) -= v(i) * v(j) * b * c;
            J.dp_dv(i, j) = -v(i) * b * s;
            J.dp_dv(i, i) -= v(j) * b * s;
            J.dq_dtheta(i, j) = v(i) * v(j) * b * s;
            J.dq_dtheta(i, i) -= v(i) * v(j) * b * s;
            J.dq_dv(i, j) = v(i) * b * c;
            J.dq_dv(i, i) += v(j) * b * c;
        }
    }
    return J;
}

InjectionJacobian injection_jacobian(const ReducedNetwork& red, const OperatingPoint& op) {
    return injection_jacobian(red.B, op.v, op.theta);
}

StateMatrix linearize(const ReducedNetwork& red, const std::vector<InverterParams>& params, const OperatingPoint& op) {
    const auto n = static_cast<Eigen::Index>(red.size());
    if (params.size() != red.size()) throw std::invalid_argument("need one InverterParams per reduced bus");
    for (const auto& p : params) p.validate();
    const InjectionJacobian J = injection_jacobian(red, op);

    StateMatrix sm;
    sm.n = red.size();
    sm.A = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    sm.angle_violations = angle_violations(red, op);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = params[static_cast<std::size_t>(i)];
        const double kp = p.m_p * p.beta_p / p.tau_p;
        const double kq = p.m_q * p.beta_q / p.tau_q;
        sm.A(i, n + i) = p.omega_b;
        sm.A(n + i, n + i) = -1.0 / p.tau_p;
        sm.A(2 * n + i, 2 * n + i) = -1.0 / p.tau_q;
        for (Eigen::Index j = 0; j < n; ++j) {
            sm.A(n + i, j) = -kp * J.dp_dtheta(i, j);
            sm.A(n + i, 2 * n + j) = -kp * J.dp_dv(i, j);
            sm.A(2 * n + i, j) = -kq * J.dq_dtheta(i, j);
            sm.A(2 * n + i, 2 * n + j) -= kq * J.dq_dv(i, j);
        }
    }
    return sm;
}

}  // namespace stabopf
