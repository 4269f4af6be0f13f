#pragma once

#include <optional>
#include <random>
#include <string>

#include "stabopf/opfcore.hpp"

namespace fixture {

using namespace stabopf;

inline Network case_file(const char* name) { return load_case(std::string(STABOPF_CASE_DIR) + "/" + name); }

// Two-bus problem with V1 fixed at 1 and explicit per-bus bounds.
inline OpfProblem two_bus_problem(const Network& net, std::optional<double> gamma1, double gamma2 = 10.0) {
    const SusceptanceMatrix B = build_susceptance(net);
    OpfOptions opt;
    opt.fixed_ref_voltage = 1.0;
    if (!gamma1) return assemble(net, B, CostModel::from_network(net), nullptr, GenLimits::from_network(net), opt);
    const StabilityConstraintSet set = build_constraints_with_gamma(kron_reduce(B, net), Eigen::Vector2d(*gamma1, gamma2));
    return assemble(net, B, CostModel::from_network(net), &set, GenLimits::from_network(net), opt);
}

// Lossless all-inverter network on a random spanning tree plus extra edges.
inline Network random_inverter_network(std::mt19937& rng, int n, double d_cost) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Network net;
    net.ref_bus = 1;
    for (int i = 1; i <= n; ++i) {
        Bus b;
        b.id = i;
        b.kind = BusKind::inverter;
        b.pd = 0.2 + 0.6 * u(rng);
        b.qd = 0.1 + 0.3 * u(rng);
        b.vmin = 0.9;
        b.vmax = 1.1;
        net.buses.push_back(b);
        GeneratorData g;
        g.bus = i;
        g.pmin = 0.0;
        g.pmax = 3.0;
        g.qmin = -3.0;
        g.qmax = 3.0;
        g.b = 0.2 + u(rng);
        g.c = 0.05 + 0.3 * u(rng);
        g.d = d_cost > 0.0 ? d_cost * (0.5 + u(rng)) : 0.0;
        net.generators.push_back(g);
    }
    auto add = [&](int a, int b) {
        Branch br;
        br.from = a;
        br.to = b;
        br.b = 4.0 + 6.0 * u(rng);
        br.smax = 50.0;
        net.branches.push_back(br);
    };
    for (int i = 2; i <= n; ++i) add(1 + static_cast<int>(u(rng) * (i - 1)), i);
    for (int i = 1; i <= n; ++i)
        for (int j = i + 2; j <= n; ++j)
            if (u(rng) < 0.3) add(i, j);
    return net;
}

// Random instance with per-bus bounds placed below the unconstrained
// voltage differences, so that some stability constraints bind.
struct Instance {
    OpfProblem prob;
    OpfSolution sol;
};

inline std::optional<Instance> random_binding_instance(std::mt19937& rng, int n, double d_cost, bool fix_ref, const SolveOptions& so) {
    const Network net = random_inverter_network(rng, n, d_cost);
    const SusceptanceMatrix B = build_susceptance(net);
    OpfOptions oo;
    if (fix_ref) oo.fixed_ref_voltage = 1.0;
    const ReducedNetwork red = kron_reduce(B, net);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd gamma(n);
    if (d_cost > 0.0) {
        const OpfProblem free_p = assemble(net, B, CostModel::from_network(net), nullptr, GenLimits::from_network(net), oo);
        const OpfSolution free_s = solve(free_p, default_starts(free_p), so);
        if (!free_s.ok()) return std::nullopt;
        for (int i = 0; i < n; ++i) {
            double worst = 0.0;
            for (std::size_t j : red.neighbors[static_cast<std::size_t>(i)])
                worst = std::max(worst, free_s.x.v(static_cast<Eigen::Index>(j)) - free_s.x.v(i));
            gamma(i) = worst > 1e-3 ? (0.3 + 0.4 * u(rng)) * worst : 0.05;
        }
    } else {
        for (int i = 0; i < n; ++i) gamma(i) = 0.005 + 0.02 * u(rng);
    }
    const StabilityConstraintSet set = build_constraints_with_gamma(red, gamma);
    const OpfProblem p = assemble(net, B, CostModel::from_network(net), &set, GenLimits::from_network(net), oo);
    OpfSolution s = solve(p, default_starts(p), so);
    if (!s.ok()) return std::nullopt;
    if (d_cost == 0.0) s = refine_flat_optimum(p, s, voltage_tilt(p), 1e-2, so);
    return Instance{p, s};
}

}  // namespace fixture
