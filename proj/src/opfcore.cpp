#include "stabopf/opfcore.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "stabopf/dynamics.hpp"

namespace stabopf {

CostModel CostModel::from_network(const Network& net) {
    CostModel cm;
    for (std::size_t k : net.inverter_indices()) {
        const GeneratorData* g = net.generator_at(net.buses[k].id);
        if (!g) throw std::invalid_argument("inverter bus " + std::to_string(net.buses[k].id) + " has no generator record");
        cm.a.push_back(g->a);
        cm.b.push_back(g->b);
        cm.c.push_back(g->c);
        cm.d.push_back(g->d);
    }
    return cm;
}

GenLimits GenLimits::from_network(const Network& net) {
    const auto inv = net.inverter_indices();
    const auto n = static_cast<Eigen::Index>(inv.size());
    GenLimits lim{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const GeneratorData* g = net.generator_at(net.buses[inv[static_cast<std::size_t>(k)]].id);
        if (!g) throw std::invalid_argument("inverter bus " + std::to_string(net.buses[inv[static_cast<std::size_t>(k)]].id) + " has no generator record");
        lim.pmin(k) = g->pmin;
        lim.pmax(k) = g->pmax;
        lim.qmin(k) = g->qmin;
        lim.qmax(k) = g->qmax;
    }
    return lim;
}

std::string describe(const InequalityTag& tag, const Network& net) {
    std::ostringstream os;
    auto gen_id = [&](std::size_t k) { return net.buses[net.inverter_indices()[k]].id; };
    switch (tag.kind) {
        case InequalityKind::p_upper: os << "Pmax@" << gen_id(tag.index); break;
        case InequalityKind::p_lower: os << "Pmin@" << gen_id(tag.index); break;
        case InequalityKind::q_upper: os << "Qmax@" << gen_id(tag.index); break;
        case InequalityKind::q_lower: os << "Qmin@" << gen_id(tag.index); break;
        case InequalityKind::v_upper: os << "Vmax@" << net.buses[tag.index].id; break;
        case InequalityKind::v_lower: os << "Vmin@" << net.buses[tag.index].id; break;
        case InequalityKind::branch_flow:
            os << "S@" << net.branches[tag.index].from << "-" << net.branches[tag.index].to;
            break;
        case InequalityKind::stability: os << "stab" << tag.index; break;
    }
    return os.str();
}

std::string to_string(OpfStatus s) {
    switch (s) {
        case OpfStatus::optimal: return "optimal";
        case OpfStatus::infeasible: return "infeasible";
        case OpfStatus::max_iter: return "max_iter";
        case OpfStatus::degenerate: return "degenerate";
    }
    return "unknown";
}

Eigen::VectorXd OpfProblem::pack(const DecisionVector& x) const {
    const auto ng = static_cast<Eigen::Index>(n_gen());
    const auto nb = static_cast<Eigen::Index>(n_bus());
    if (x.pg.size() != ng || x.qg.size() != ng || x.v.size() != nb || x.theta.size() != nb) {
        throw std::invalid_argument("decision vector dimensions do not match the problem");
    }
    Eigen::VectorXd full(n_full());
    full << x.pg, x.qg, x.v, x.theta;
    return full;
}

DecisionVector OpfProblem::unpack(const Eigen::VectorXd& full) const {
    const auto ng = static_cast<Eigen::Index>(n_gen());
    const auto nb = static_cast<Eigen::Index>(n_bus());
    return {full.segment(0, ng), full.segment(ng, ng), full.segment(2 * ng, nb), full.segment(2 * ng + nb, nb)};
}

Eigen::VectorXd OpfProblem::to_free(const DecisionVector& x) const {
    const Eigen::VectorXd full = pack(x);
    Eigen::VectorXd z(static_cast<Eigen::Index>(free_index.size()));
    for (std::size_t k = 0; k < free_index.size(); ++k) z(static_cast<Eigen::Index>(k)) = full(free_index[k]);
    return z;
}

DecisionVector OpfProblem::from_free(const Eigen::VectorXd& z) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n_full());
    const auto ng = static_cast<Eigen::Index>(n_gen());
    const auto nb = static_cast<Eigen::Index>(n_bus());
    const auto ref = static_cast<Eigen::Index>(ref_index());
    if (options.fixed_ref_voltage) full(2 * ng + ref) = *options.fixed_ref_voltage;
    for (std::size_t k = 0; k < free_index.size(); ++k) full(free_index[k]) = z(static_cast<Eigen::Index>(k));
    full(2 * ng + nb + ref) = 0.0;
    return unpack(full);
}

double OpfProblem::objective(const DecisionVector& x) const {
    double f = 0.0;
    for (std::size_t k = 0; k < n_gen(); ++k) {
        const double p = x.pg(static_cast<Eigen::Index>(k));
        const double q = x.qg(static_cast<Eigen::Index>(k));
        f += cost.a[k] + cost.b[k] * p + cost.c[k] * p * p + cost.d_eff(k) * q * q;
    }
    return f;
}

Eigen::VectorXd OpfProblem::objective_gradient(const DecisionVector& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_full());
    const auto ng = static_cast<Eigen::Index>(n_gen());
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        g(k) = cost.b[kk] + 2.0 * cost.c[kk] * x.pg(k);
        g(ng + k) = 2.0 * cost.d_eff(kk) * x.qg(k);
    }
    return g;
}

OpfProblem assemble(const Network& net, const SusceptanceMatrix& B, const CostModel& cost, const StabilityConstraintSet* stab,
                    const GenLimits& limits, const OpfOptions& options) {
    validate(net);
    const std::uint64_t tag = fingerprint(net);
    if (B.source_tag != tag) throw std::invalid_argument("susceptance matrix built from a different network");
    if (stab && stab->red.source_tag != tag) throw std::invalid_argument("stability set built from a different network");

    OpfProblem p;
    p.net = net;
    p.B = B;
    p.cost = cost;
    p.limits = limits;
    p.options = options;
    p.gen_bus = net.inverter_indices();
    const std::size_t ng = p.gen_bus.size();
    const auto ngi = static_cast<Eigen::Index>(ng);
    if (cost.a.size() != ng || cost.b.size() != ng || cost.c.size() != ng || cost.d.size() != ng) {
        throw std::invalid_argument("cost model does not have one entry per inverter");
    }
    for (std::size_t k = 0; k < ng; ++k) {
        if (cost.c[k] < 0.0 || cost.d_eff(k) < 0.0) throw std::invalid_argument("quadratic cost coefficients must be non-negative");
    }
    if (limits.pmin.size() != ngi || limits.pmax.size() != ngi || limits.qmin.size() != ngi || limits.qmax.size() != ngi) {
        throw std::invalid_argument("generator limits do not have one entry per inverter");
    }
    for (Eigen::Index k = 0; k < ngi; ++k) {
        if (limits.pmin(k) > limits.pmax(k) || limits.qmin(k) > limits.qmax(k)) throw std::invalid_argument("generator limits out of order");
    }
    if (stab) {
        if (stab->red.size() != ng) throw std::invalid_argument("stability set does not cover the inverter buses");
        for (std::size_t r = 0; r < stab->red.size(); ++r) {
            const std::size_t bus = stab->red.kept_index[r];
            if (bus >= net.n_bus() || net.buses[bus].kind != BusKind::inverter) {
                throw std::invalid_argument("stability constraint references a non-inverter bus");
            }
            p.stab_bus.push_back(bus);
        }
        p.stab = *stab;
    }

    for (std::size_t k = 0; k < ng; ++k) p.ineq.push_back({InequalityKind::p_upper, k});
    for (std::size_t k = 0; k < ng; ++k) p.ineq.push_back({InequalityKind::p_lower, k});
    for (std::size_t k = 0; k < ng; ++k) p.ineq.push_back({InequalityKind::q_upper, k});
    for (std::size_t k = 0; k < ng; ++k) p.ineq.push_back({InequalityKind::q_lower, k});
    for (std::size_t i = 0; i < net.n_bus(); ++i) p.ineq.push_back({InequalityKind::v_upper, i});
    for (std::size_t i = 0; i < net.n_bus(); ++i) p.ineq.push_back({InequalityKind::v_lower, i});
    for (std::size_t e = 0; e < net.branches.size(); ++e) p.ineq.push_back({InequalityKind::branch_flow, e});
    p.n_operational = p.ineq.size();
    for (std::size_t l = 0; l < p.n_stab(); ++l) p.ineq.push_back({InequalityKind::stability, l});

    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    const auto ref = static_cast<Eigen::Index>(net.ref_index());
    for (Eigen::Index k = 0; k < p.n_full(); ++k) {
        if (k == 2 * ngi + nb + ref) continue;
        if (options.fixed_ref_voltage && k == 2 * ngi + ref) continue;
        p.free_index.push_back(k);
    }
    return p;
}

ConstraintBundle evaluate_constraints(const OpfProblem& prob, const DecisionVector& x, bool derivatives) {
    const auto ng = static_cast<Eigen::Index>(prob.n_gen());
    const auto nb = static_cast<Eigen::Index>(prob.n_bus());
    const Eigen::Index nf = prob.n_full();
    const Eigen::Index cv = 2 * ng;
    const Eigen::Index ct = 2 * ng + nb;
    const Eigen::MatrixXd& B = prob.B.B;

    ConstraintBundle cb;
    const Injections inj = injections(B, x.v, x.theta);
    cb.g.resize(2 * nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const auto& bus = prob.net.buses[static_cast<std::size_t>(i)];
        cb.g(i) = bus.pd + inj.p(i);
        cb.g(nb + i) = bus.qd + inj.q(i);
    }
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto i = static_cast<Eigen::Index>(prob.gen_bus[static_cast<std::size_t>(k)]);
        cb.g(i) -= x.pg(k);
        cb.g(nb + i) -= x.qg(k);
    }
    if (derivatives) {
        const InjectionJacobian J = injection_jacobian(B, x.v, x.theta);
        cb.dg = Eigen::MatrixXd::Zero(2 * nb, nf);
        cb.dg.block(0, cv, nb, nb) = J.dp_dv;
        cb.dg.block(0, ct, nb, nb) = J.dp_dtheta;
        cb.dg.block(nb, cv, nb, nb) = J.dq_dv;
        cb.dg.block(nb, ct, nb, nb) = J.dq_dtheta;
        for (Eigen::Index k = 0; k < ng; ++k) {
            const auto i = static_cast<Eigen::Index>(prob.gen_bus[static_cast<std::size_t>(k)]);
            cb.dg(i, k) = -1.0;
            cb.dg(nb + i, ng + k) = -1.0;
        }
    }

    const auto nq = static_cast<Eigen::Index>(prob.n_operational);
    cb.q.resize(nq);
    if (derivatives) cb.dq = Eigen::MatrixXd::Zero(nq, nf);
    for (Eigen::Index r = 0; r < nq; ++r) {
        const InequalityTag& t = prob.ineq[static_cast<std::size_t>(r)];
        const auto k = static_cast<Eigen::Index>(t.index);
        switch (t.kind) {
            case InequalityKind::p_upper:
                cb.q(r) = x.pg(k) - prob.limits.pmax(k);
                if (derivatives) cb.dq(r, k) = 1.0;
                break;
            case InequalityKind::p_lower:
                cb.q(r) = prob.limits.pmin(k) - x.pg(k);
                if (derivatives) cb.dq(r, k) = -1.0;
                break;
            case InequalityKind::q_upper:
                cb.q(r) = x.qg(k) - prob.limits.qmax(k);
                if (derivatives) cb.dq(r, ng + k) = 1.0;
                break;
            case InequalityKind::q_lower:
                cb.q(r) = prob.limits.qmin(k) - x.qg(k);
                if (derivatives) cb.dq(r, ng + k) = -1.0;
                break;
            case InequalityKind::v_upper:
                cb.q(r) = x.v(k) - prob.net.buses[t.index].vmax;
                if (derivatives) cb.dq(r, cv + k) = 1.0;
                break;
            case InequalityKind::v_lower:
                cb.q(r) = prob.net.buses[t.index].vmin - x.v(k);
                if (derivatives) cb.dq(r, cv + k) = -1.0;
                break;
            case InequalityKind::branch_flow: {
                const Branch& br = prob.net.branches[t.index];
                const auto i = static_cast<Eigen::Index>(prob.net.index_of(br.from));
                const auto j = static_cast<Eigen::Index>(prob.net.index_of(br.to));
                const double bij = B(i, j);
                const double vi = x.v(i), vj = x.v(j);
                const double d = x.theta(i) - x.theta(j);
                const double c = std::cos(d), s = std::sin(d);
                const double a = vi * vi * bij - vi * vj * bij * c;
                const double bq = vi * vj * bij * s;
                cb.q(r) = a * a + bq * bq - br.smax * br.smax;
                if (derivatives) {
                    cb.dq(r, cv + i) = 2.0 * a * (2.0 * vi * bij - vj * bij * c) + 2.0 * bq * (vj * bij * s);
                    cb.dq(r, cv + j) = 2.0 * a * (-vi * bij * c) + 2.0 * bq * (vi * bij * s);
                    cb.dq(r, ct + i) = 2.0 * a * (vi * vj * bij * s) + 2.0 * bq * (vi * vj * bij * c);
                    cb.dq(r, ct + j) = -cb.dq(r, ct + i);
                }
                break;
            }
            case InequalityKind::stability:
                break;
        }
    }

    const auto nh = static_cast<Eigen::Index>(prob.n_stab());
    cb.h.resize(nh);
    if (derivatives) cb.dh = Eigen::MatrixXd::Zero(nh, nf);
    for (Eigen::Index l = 0; l < nh; ++l) {
        const StabilityConstraint& sc = prob.stab->constraints[static_cast<std::size_t>(l)];
        const auto bi = static_cast<Eigen::Index>(prob.stab_bus[sc.i]);
        const auto bj = static_cast<Eigen::Index>(prob.stab_bus[sc.j]);
        cb.h(l) = x.v(bj) - x.v(bi) - sc.gamma;
        if (derivatives) {
            cb.dh(l, cv + bj) = 1.0;
            cb.dh(l, cv + bi) = -1.0;
        }
    }
    return cb;
}

namespace {

class OpfNlp : public Nlp {
  public:
    explicit OpfNlp(const OpfProblem& p, Eigen::VectorXd linear = {}) : p_(p), linear_(std::move(linear)) {}
    Eigen::Index n_vars() const override { return static_cast<Eigen::Index>(p_.free_index.size()); }
    Eigen::Index n_eq() const override { return static_cast<Eigen::Index>(2 * p_.n_bus()); }
    Eigen::Index n_ineq() const override { return static_cast<Eigen::Index>(p_.ineq.size()); }

    void evaluate(const Eigen::VectorXd& z, NlpEvaluation& out, bool derivatives) const override {
        const DecisionVector x = p_.from_free(z);
        const ConstraintBundle cb = evaluate_constraints(p_, x, derivatives);
        out.f = p_.objective(x);
        if (linear_.size()) out.f += linear_.dot(p_.pack(x));
        out.ce = cb.g;
        out.ci.resize(cb.q.size() + cb.h.size());
        out.ci << cb.q, cb.h;
        if (!derivatives) return;
        Eigen::VectorXd gf = p_.objective_gradient(x);
        if (linear_.size()) gf += linear_;
        const Eigen::Index nz = n_vars();
        out.grad.resize(nz);
        out.Je.resize(cb.dg.rows(), nz);
        out.Ji.resize(out.ci.size(), nz);
        for (Eigen::Index k = 0; k < nz; ++k) {
            const Eigen::Index c = p_.free_index[static_cast<std::size_t>(k)];
            out.grad(k) = gf(c);
            out.Je.col(k) = cb.dg.col(c);
            out.Ji.col(k).head(cb.q.size()) = cb.dq.col(c);
            if (cb.h.size()) out.Ji.col(k).tail(cb.h.size()) = cb.dh.col(c);
        }
    }

  private:
    const OpfProblem& p_;
    Eigen::VectorXd linear_;
};

SqpOptions sqp_options(const SolveOptions& options) {
    SqpOptions so;
    so.tol = options.tol;
    so.acceptable_tol = std::max(options.acceptable_tol, options.tol);
    so.max_iter = options.max_iter;
    return so;
}

OpfStatus map_status(SqpStatus s) {
    switch (s) {
        case SqpStatus::optimal:
        case SqpStatus::acceptable: return OpfStatus::optimal;
        case SqpStatus::degenerate: return OpfStatus::degenerate;
        case SqpStatus::max_iter: return OpfStatus::max_iter;
        case SqpStatus::infeasible:
        case SqpStatus::failed: return OpfStatus::infeasible;
    }
    return OpfStatus::infeasible;
}

OpfSolution build_solution(const OpfProblem& prob, const SqpResult& r, const SolveOptions& opt) {
    OpfSolution sol;
    sol.x = prob.from_free(r.x);
    sol.objective = prob.objective(sol.x);
    const auto nb = static_cast<Eigen::Index>(prob.n_bus());
    sol.lambda_p = r.y.head(nb);
    sol.lambda_q = r.y.tail(nb);
    const auto nq = static_cast<Eigen::Index>(prob.n_operational);
    sol.nu = r.mu.head(nq);
    sol.mu_stab = r.mu.tail(r.mu.size() - nq);
    const ConstraintBundle cb = evaluate_constraints(prob, sol.x, true);
    sol.q_values = cb.q;
    sol.h_values = cb.h;
    for (Eigen::Index k = 0; k < cb.q.size(); ++k)
        if (std::abs(cb.q(k)) <= opt.binding_tol) sol.active_set.push_back(static_cast<std::size_t>(k));
    for (Eigen::Index k = 0; k < cb.h.size(); ++k)
        if (std::abs(cb.h(k)) <= opt.binding_tol) sol.active_set.push_back(static_cast<std::size_t>(nq + k));
    sol.kkt_residual = r.kkt_residual;
    sol.feasibility = r.feasibility;
    sol.complementarity = r.complementarity;
    sol.condition = r.active_condition;
    sol.acceptable_only = r.status == SqpStatus::acceptable;
    sol.status = map_status(r.status);
    const Eigen::VectorXd gl = lagrangian_gradient(prob, sol.x, sol);
    double st = 0.0;
    for (Eigen::Index c : prob.free_index) st = std::max(st, std::abs(gl(c)));
    sol.stationarity_abs = st;
    return sol;
}

}  // namespace

Eigen::VectorXd lagrangian_gradient(const OpfProblem& prob, const DecisionVector& x, const OpfSolution& duals) {
    const ConstraintBundle cb = evaluate_constraints(prob, x, true);
    Eigen::VectorXd y(duals.lambda_p.size() + duals.lambda_q.size());
    y << duals.lambda_p, duals.lambda_q;
    Eigen::VectorXd g = prob.objective_gradient(x) + cb.dg.transpose() * y + cb.dq.transpose() * duals.nu;
    if (cb.h.size()) g += cb.dh.transpose() * duals.mu_stab;
    return g;
}

DecisionVector flat_start(const OpfProblem& prob) {
    const auto ng = static_cast<Eigen::Index>(prob.n_gen());
    const auto nb = static_cast<Eigen::Index>(prob.n_bus());
    double pd = 0.0, qd = 0.0;
    for (const auto& b : prob.net.buses) {
        pd += b.pd;
        qd += b.qd;
    }
    DecisionVector x{Eigen::VectorXd(ng), Eigen::VectorXd(ng), Eigen::VectorXd::Ones(nb), Eigen::VectorXd::Zero(nb)};
    for (Eigen::Index k = 0; k < ng; ++k) {
        x.pg(k) = std::clamp(pd / static_cast<double>(ng), prob.limits.pmin(k), prob.limits.pmax(k));
        x.qg(k) = std::clamp(qd / static_cast<double>(ng), prob.limits.qmin(k), prob.limits.qmax(k));
    }
    if (prob.options.fixed_ref_voltage) x.v(static_cast<Eigen::Index>(prob.ref_index())) = *prob.options.fixed_ref_voltage;
    return x;
}

std::vector<DecisionVector> default_starts(const OpfProblem& prob, std::uint64_t seed, std::size_t n_random) {
    std::vector<DecisionVector> out{flat_start(prob)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const DecisionVector flat = out.front();
    const auto ref = static_cast<Eigen::Index>(prob.ref_index());
    for (std::size_t s = 0; s < n_random; ++s) {
        DecisionVector x = flat;
        for (Eigen::Index i = 0; i < x.v.size(); ++i) {
            const auto& b = prob.net.buses[static_cast<std::size_t>(i)];
            if (!(prob.options.fixed_ref_voltage && i == ref)) x.v(i) = b.vmin + (b.vmax - b.vmin) * unit(rng);
            x.theta(i) = i == ref ? 0.0 : 0.2 * (2.0 * unit(rng) - 1.0);
        }
        for (Eigen::Index k = 0; k < x.pg.size(); ++k) {
            x.pg(k) = std::clamp(flat.pg(k) * (0.7 + 0.6 * unit(rng)), prob.limits.pmin(k), prob.limits.pmax(k));
            const double span = prob.limits.qmax(k) - prob.limits.qmin(k);
            x.qg(k) = std::clamp(flat.qg(k) + 0.2 * span * (2.0 * unit(rng) - 1.0), prob.limits.qmin(k), prob.limits.qmax(k));
        }
        out.push_back(std::move(x));
    }
    return out;
}

OpfSolution solve(const OpfProblem& prob, const std::vector<DecisionVector>& starts, const SolveOptions& options) {
    if (starts.empty()) throw std::invalid_argument("solve needs at least one start");
    if (!(options.tol > 0.0)) throw std::invalid_argument("solve tolerance must be positive");
    const OpfNlp nlp(prob);
    const SqpOptions so = sqp_options(options);

    std::vector<StartDiagnostics> diag;
    std::optional<OpfSolution> best;
    std::optional<OpfSolution> fallback;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const SqpResult r = solve_sqp(nlp, prob.to_free(starts[s]), so);
        OpfSolution sol = build_solution(prob, r, options);
        diag.push_back({s, r.status, sol.objective, r.kkt_residual, r.feasibility, r.iterations, r.message});
        if (sol.ok()) {
            sol.best_start = s;
            const double tie = options.tie_rel * std::max(1.0, std::abs(sol.objective));
            if (!best || sol.objective < best->objective - tie) best = std::move(sol);
        } else if (!fallback || sol.kkt_residual < fallback->kkt_residual) {
            sol.best_start = s;
            fallback = std::move(sol);
        }
    }
    OpfSolution out;
    if (best) {
        out = std::move(*best);
    } else {
        out = std::move(*fallback);
        bool any_max_iter = false;
        for (const auto& d : diag) any_max_iter = any_max_iter || d.status == SqpStatus::max_iter;
        out.status = any_max_iter ? OpfStatus::max_iter : OpfStatus::infeasible;
    }
    out.starts = std::move(diag);
    return out;
}

Eigen::VectorXd voltage_tilt(const OpfProblem& prob) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(prob.n_full());
    c.segment(static_cast<Eigen::Index>(2 * prob.n_gen()), static_cast<Eigen::Index>(prob.n_bus())).setConstant(-1.0);
    return c;
}

OpfSolution refine_flat_optimum(const OpfProblem& prob, const OpfSolution& sol, const Eigen::VectorXd& c, double weight,
                                const SolveOptions& options) {
    if (c.size() != prob.n_full()) throw std::invalid_argument("tie-break direction has the wrong dimension");
    const SqpOptions so = sqp_options(options);
    const SqpResult tilted = solve_sqp(OpfNlp(prob, weight * c), prob.to_free(sol.x), so);
    if (map_status(tilted.status) != OpfStatus::optimal && map_status(tilted.status) != OpfStatus::degenerate) return sol;
    const SqpResult r = solve_sqp(OpfNlp(prob), tilted.x, so);
    OpfSolution out = build_solution(prob, r, options);
    const double tie = options.tie_rel * std::max(1.0, std::abs(sol.objective));
    if (!out.ok() || out.objective > sol.objective + tie) return sol;
    out.best_start = sol.best_start;
    out.starts = sol.starts;
    return out;
}

std::vector<OpfSolution> solve_sweep(const std::function<OpfProblem(double)>& make, const std::vector<double>& axis,
                                     const SweepOptions& options) {
    bool up = true, down = true;
    for (std::size_t k = 1; k < axis.size(); ++k) {
        up = up && axis[k] >= axis[k - 1];
        down = down && axis[k] <= axis[k - 1];
    }
    if (!up && !down) throw std::invalid_argument("sweep axis must be monotone");
    std::vector<OpfSolution> out;
    for (std::size_t k = 0; k < axis.size(); ++k) {
        const OpfProblem prob = make(axis[k]);
        std::vector<DecisionVector> starts = options.starts ? options.starts(prob) : default_starts(prob);
        if (options.warm_start && k > 0 && out.back().ok()) starts.insert(starts.begin(), out.back().x);
        out.push_back(solve(prob, starts, options.solve));
    }
    return out;
}

}  // namespace stabopf
