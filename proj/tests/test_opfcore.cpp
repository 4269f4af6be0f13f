#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "stabopf/opfcore.hpp"

using namespace stabopf;

using namespace fixture;

namespace {

DecisionVector random_point(const OpfProblem& p, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DecisionVector x = flat_start(p);
    for (Eigen::Index k = 0; k < x.pg.size(); ++k) {
        x.pg(k) += 0.5 * u(rng);
        x.qg(k) += 0.5 * u(rng);
    }
    for (Eigen::Index i = 0; i < x.v.size(); ++i) {
        x.v(i) = 1.0 + 0.1 * u(rng);
        x.theta(i) = 0.5 * u(rng);
    }
    return x;
}

}  // namespace

TEST_CASE("two-bus problem structure") {
    const OpfProblem p = two_bus_problem(case_file("two_bus_zero_price.case"), 0.01);
    CHECK(p.n_stab() == 2);
    std::size_t n_flow = 0;
    for (const auto& t : p.ineq) n_flow += t.kind == InequalityKind::branch_flow;
    CHECK(n_flow == 1);
    // theta_ref and V_ref eliminated.
    CHECK(p.free_index.size() == static_cast<std::size_t>(p.n_full()) - 2);
    CHECK(describe(p.ineq.back(), p.net) == "stab1");
}

TEST_CASE("pack, unpack and free coordinates round trip") {
    const OpfProblem p = two_bus_problem(case_file("two_bus_reactive_cost.case"), 0.04);
    std::mt19937 rng(5);
    DecisionVector x = random_point(p, rng);
    x.theta(static_cast<Eigen::Index>(p.ref_index())) = 0.0;
    x.v(static_cast<Eigen::Index>(p.ref_index())) = 1.0;
    const DecisionVector y = p.from_free(p.to_free(x));
    CHECK((p.pack(x) - p.pack(y)).cwiseAbs().maxCoeff() == 0.0);
    const DecisionVector u = p.unpack(p.pack(x));
    CHECK((u.v - x.v).norm() == 0.0);
}

TEST_CASE("constraint Jacobians match finite differences") {
    const Network net39 = case_file("ieee39_lossless.case");
    const SusceptanceMatrix B39 = build_susceptance(net39);
    const ReducedNetwork red39 = kron_reduce(B39, net39);
    const StabilityConstraintSet set39 = build_constraints(red39, uniform_params(red39.size(), 0.2, InverterParams{}));
    const OpfProblem p39 = assemble(net39, B39, CostModel::from_network(net39), &set39, GenLimits::from_network(net39));
    const OpfProblem p2 = two_bus_problem(case_file("two_bus_reactive_cost.case"), 0.04);
    std::mt19937 rng(77);
    for (const OpfProblem* p : {&p2, &p39}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Eigen::VectorXd x0 = p->pack(random_point(*p, rng));
            const ConstraintBundle cb = evaluate_constraints(*p, p->unpack(x0), true);
            auto part = [&](int which) {
                return [&, which](const Eigen::VectorXd& z) -> Eigen::VectorXd {
                    const ConstraintBundle c = evaluate_constraints(*p, p->unpack(z), false);
                    return which == 0 ? c.g : which == 1 ? c.q : c.h;
                };
            };
            CHECK(oracle::rel_error(cb.dg, oracle::fd_jacobian(part(0), x0)) <= 1e-5);
            CHECK(oracle::rel_error(cb.dq, oracle::fd_jacobian(part(1), x0)) <= 1e-5);
            CHECK(oracle::rel_error(cb.dh, oracle::fd_jacobian(part(2), x0)) <= 1e-5);
            const Eigen::VectorXd gf = p->objective_gradient(p->unpack(x0));
            const Eigen::MatrixXd fd = oracle::fd_jacobian(
                [&](const Eigen::VectorXd& z) { return Eigen::VectorXd::Constant(1, p->objective(p->unpack(z))); }, x0);
            CHECK(oracle::rel_error(gf.transpose(), fd) <= 1e-5);
        }
    }
}

TEST_CASE("lossless power balance: sum of g_P equals load minus generation") {
    const Network net = case_file("ieee39_lossless.case");
    const OpfProblem p = assemble(net, build_susceptance(net), CostModel::from_network(net), nullptr, GenLimits::from_network(net));
    std::mt19937 rng(9);
    double pd = 0.0;
    for (const auto& b : net.buses) pd += b.pd;
    for (int trial = 0; trial < 20; ++trial) {
        const DecisionVector x = random_point(p, rng);
        const ConstraintBundle cb = evaluate_constraints(p, x, false);
        CHECK(std::abs(cb.g.head(static_cast<Eigen::Index>(p.n_bus())).sum() - (pd - x.pg.sum())) <= 1e-10);
    }
}

TEST_CASE("assemble rejects a stability set from another network") {
    const Network a = case_file("two_bus_zero_price.case");
    const Network b = case_file("two_bus_reactive_cost.case");
    const SusceptanceMatrix Bb = build_susceptance(b);
    const StabilityConstraintSet set = build_constraints_with_gamma(kron_reduce(Bb, b), Eigen::Vector2d(0.04, 10.0));
    try {
        assemble(a, build_susceptance(a), CostModel::from_network(a), &set, GenLimits::from_network(a));
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()) == "stability set built from a different network");
    }
}

TEST_CASE("P-only two-bus optimum with binding stability constraint") {
    const Network net = case_file("two_bus_zero_price.case");
    for (double g : {0.005, 0.01, 0.03}) {
        const OpfProblem p = two_bus_problem(net, g);
        const OpfSolution first = solve(p, default_starts(p));
        REQUIRE(first.ok());
        const OpfSolution s = refine_flat_optimum(p, first, voltage_tilt(p), 1e-2);
        REQUIRE(s.ok());
        CHECK(s.objective <= first.objective + 1e-9);
        CHECK(s.objective == doctest::Approx(0.7456).epsilon(5e-4 / 0.7456));
        CHECK(s.x.v(1) == doctest::Approx(1.0 + g).epsilon(1e-4));
        CHECK(std::abs(s.h_values(0)) <= 1e-6);
        CHECK(std::abs(s.mu_stab(0)) <= 1e-6);
        // Equal marginal costs at both buses on a lossless network.
        CHECK(s.lambda_p(0) == doctest::Approx(s.lambda_p(1)).epsilon(1e-6));
    }
}

TEST_CASE("KKT invariants at reactive-cost optimum") {
    const OpfProblem p = two_bus_problem(case_file("two_bus_reactive_cost.case"), 0.04);
    const OpfSolution s = solve(p, default_starts(p));
    REQUIRE(s.status == OpfStatus::optimal);
    CHECK(s.kkt_residual <= 1e-6);
    CHECK(s.stationarity_abs <= 1e-6);
    CHECK(s.nu.minCoeff() >= 0.0);
    CHECK(s.mu_stab.minCoeff() >= 0.0);
    for (Eigen::Index k = 0; k < s.q_values.size(); ++k) CHECK(std::abs(s.nu(k) * s.q_values(k)) <= 1e-6);
    for (Eigen::Index k = 0; k < s.h_values.size(); ++k) CHECK(std::abs(s.mu_stab(k) * s.h_values(k)) <= 1e-6);
    CHECK(s.q_values.maxCoeff() <= 1e-8);
    CHECK(s.h_values.maxCoeff() <= 1e-8);
    CHECK(s.mu_stab(0) > 0.0);
    CHECK(s.starts.size() == 9);
}

TEST_CASE("tightening the stability bound never lowers the objective") {
    const Network net = case_file("two_bus_reactive_cost.case");
    const OpfProblem free_p = two_bus_problem(net, std::nullopt);
    const OpfSolution unc = solve(free_p, default_starts(free_p));
    REQUIRE(unc.ok());
    const std::vector<double> axis{0.2, 0.1, 0.06, 0.05, 0.04, 0.03};
    const auto sols = solve_sweep([&](double g) { return two_bus_problem(net, g); }, axis);
    double prev = unc.objective;
    for (const auto& s : sols) {
        REQUIRE(s.ok());
        CHECK(s.objective >= prev - 1e-9);
        prev = s.objective;
    }
    // A loose bound leaves the unconstrained optimum unchanged.
    CHECK(sols.front().objective == doctest::Approx(unc.objective).epsilon(1e-9));
}

TEST_CASE("sweep axis must be monotone") {
    const Network net = case_file("two_bus_reactive_cost.case");
    CHECK_THROWS_AS(solve_sweep([&](double g) { return two_bus_problem(net, g); }, {0.1, 0.05, 0.08}), std::invalid_argument);
}
