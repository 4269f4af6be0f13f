#include <cmath>
#include <functional>

#include "doctest.h"
#include "stabopf/sqp.hpp"

using namespace stabopf;

namespace {

// Generic NLP from closures with analytic derivatives.
struct LambdaNlp : Nlp {
    Eigen::Index n, me, mi;
    std::function<void(const Eigen::VectorXd&, NlpEvaluation&)> fn;
    Eigen::Index n_vars() const override { return n; }
    Eigen::Index n_eq() const override { return me; }
    Eigen::Index n_ineq() const override { return mi; }
    void evaluate(const Eigen::VectorXd& x, NlpEvaluation& out, bool) const override { fn(x, out); }
};

LambdaNlp hs071() {
    LambdaNlp p;
    p.n = 4;
    p.me = 1;
    p.mi = 9;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        o.f = x(0) * x(3) * (x(0) + x(1) + x(2)) + x(2);
        o.grad = Eigen::Vector4d(x(3) * (2 * x(0) + x(1) + x(2)), x(0) * x(3), x(0) * x(3) + 1.0, x(0) * (x(0) + x(1) + x(2)));
        o.ce = Eigen::VectorXd::Constant(1, x.squaredNorm() - 40.0);
        o.Je = 2.0 * x.transpose();
        o.ci.resize(9);
        o.Ji = Eigen::MatrixXd::Zero(9, 4);
        o.ci(0) = 25.0 - x.prod();
        for (int k = 0; k < 4; ++k) {
            double pr = 1.0;
            for (int j = 0; j < 4; ++j)
                if (j != k) pr *= x(j);
            o.Ji(0, k) = -pr;
            o.ci(1 + k) = x(k) - 5.0;
            o.Ji(1 + k, k) = 1.0;
            o.ci(5 + k) = 1.0 - x(k);
            o.Ji(5 + k, k) = -1.0;
        }
    };
    return p;
}

}  // namespace

TEST_CASE("Rosenbrock without constraints") {
    LambdaNlp p;
    p.n = 2;
    p.me = 0;
    p.mi = 0;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        o.f = a * a + 100.0 * b * b;
        o.grad = Eigen::Vector2d(-2.0 * a - 400.0 * x(0) * b, 200.0 * b);
        o.ce.resize(0);
        o.Je.resize(0, 2);
        o.ci.resize(0);
        o.Ji.resize(0, 2);
    };
    const SqpResult r = solve_sqp(p, Eigen::Vector2d(-1.2, 1.0));
    REQUIRE(r.status == SqpStatus::optimal);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("HS071 reaches the published optimum") {
    const LambdaNlp p = hs071();
    const SqpResult r = solve_sqp(p, Eigen::Vector4d(1.0, 5.0, 5.0, 1.0));
    REQUIRE(r.status == SqpStatus::optimal);
    CHECK(r.f == doctest::Approx(17.0140173).epsilon(1e-7));
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(4.7429994).epsilon(1e-6));
    CHECK(r.x(2) == doctest::Approx(3.8211503).epsilon(1e-6));
    CHECK(r.x(3) == doctest::Approx(1.3794082).epsilon(1e-6));
    CHECK(r.mu.minCoeff() >= 0.0);
    // Lagrangian stationarity with the returned multipliers.
    NlpEvaluation e;
    p.evaluate(r.x, e, true);
    const Eigen::VectorXd st = e.grad + e.Je.transpose() * r.y + e.Ji.transpose() * r.mu;
    CHECK(st.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("equality-constrained quadratic has analytic multiplier") {
    // min x^2 + y^2 s.t. x + y = 2 -> x = y = 1, y_eq = -2
    LambdaNlp p;
    p.n = 2;
    p.me = 1;
    p.mi = 0;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        o.f = x.squaredNorm();
        o.grad = 2.0 * x;
        o.ce = Eigen::VectorXd::Constant(1, x.sum() - 2.0);
        o.Je = Eigen::RowVector2d(1.0, 1.0);
        o.ci.resize(0);
        o.Ji.resize(0, 2);
    };
    const SqpResult r = solve_sqp(p, Eigen::Vector2d(3.0, -4.0));
    REQUIRE(r.status == SqpStatus::optimal);
    CHECK(r.x(0) == doctest::Approx(1.0));
    CHECK(r.y(0) == doctest::Approx(-2.0));
}

TEST_CASE("multipliers are invariant to objective scale") {
    // Same problem with the objective multiplied by 1e4.
    LambdaNlp p;
    p.n = 2;
    p.me = 0;
    p.mi = 1;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        o.f = 1e4 * ((x(0) - 2.0) * (x(0) - 2.0) + x(1) * x(1));
        o.grad = 1e4 * Eigen::Vector2d(2.0 * (x(0) - 2.0), 2.0 * x(1));
        o.ce.resize(0);
        o.Je.resize(0, 2);
        o.ci = Eigen::VectorXd::Constant(1, x(0) - 1.0);
        o.Ji = Eigen::RowVector2d(1.0, 0.0);
    };
    const SqpResult r = solve_sqp(p, Eigen::Vector2d(0.0, 1.0));
    REQUIRE(r.status == SqpStatus::optimal);
    CHECK(r.x(0) == doctest::Approx(1.0));
    CHECK(r.mu(0) == doctest::Approx(2e4).epsilon(1e-6));
}

TEST_CASE("dependent active gradients are flagged degenerate") {
    // x <= 0 written twice; minimiser of (x-1)^2 sits on both copies.
    LambdaNlp p;
    p.n = 1;
    p.me = 0;
    p.mi = 2;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        o.f = (x(0) - 1.0) * (x(0) - 1.0);
        o.grad = Eigen::VectorXd::Constant(1, 2.0 * (x(0) - 1.0));
        o.ce.resize(0);
        o.Je.resize(0, 1);
        o.ci = Eigen::Vector2d(x(0), 2.0 * x(0));
        o.Ji = Eigen::Vector2d(1.0, 2.0);
    };
    const SqpResult r = solve_sqp(p, Eigen::VectorXd::Constant(1, -0.5));
    CHECK(r.status == SqpStatus::degenerate);
    CHECK(std::abs(r.x(0)) <= 1e-8);
    // Least-norm split of the total multiplier 2: mu = (0.4, 0.8).
    CHECK(r.mu(0) == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(r.mu(1) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("infeasible constraints are reported") {
    LambdaNlp p;
    p.n = 1;
    p.me = 1;
    p.mi = 0;
    p.fn = [](const Eigen::VectorXd& x, NlpEvaluation& o) {
        o.f = x(0);
        o.grad = Eigen::VectorXd::Ones(1);
        o.ce = Eigen::VectorXd::Constant(1, x(0) * x(0) + 1.0);
        o.Je = Eigen::MatrixXd::Constant(1, 1, 2.0 * x(0));
    };
    p.fn = [f = p.fn](const Eigen::VectorXd& x, NlpEvaluation& o) {
        f(x, o);
        o.ci.resize(0);
        o.Ji.resize(0, 1);
    };
    const SqpResult r = solve_sqp(p, Eigen::VectorXd::Constant(1, 0.3));
    CHECK(r.status == SqpStatus::infeasible);
}
