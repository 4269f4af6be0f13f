#include "stabopf/econdual.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "stabopf/qp.hpp"

namespace stabopf {

namespace {

Eigen::VectorXd restrict_free(const OpfProblem& prob, const Eigen::VectorXd& full) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(prob.free_index.size()));
    for (std::size_t k = 0; k < prob.free_index.size(); ++k) z(static_cast<Eigen::Index>(k)) = full(prob.free_index[k]);
    return z;
}

Eigen::MatrixXd restrict_free_cols(const OpfProblem& prob, const Eigen::MatrixXd& full) {
    Eigen::MatrixXd out(full.rows(), static_cast<Eigen::Index>(prob.free_index.size()));
    for (std::size_t k = 0; k < prob.free_index.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = full.col(prob.free_index[k]);
    return out;
}

struct Tangent {
    Eigen::MatrixXd Z;
    std::size_t n_active_operational = 0;
};

// Null space of the equality Jacobian plus active operational rows.
Tangent tangent_space(const OpfProblem& prob, const ConstraintBundle& cb, double binding_tol, double rank_rel_tol) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index k = 0; k < cb.q.size(); ++k)
        if (std::abs(cb.q(k)) <= binding_tol) act.push_back(k);
    const Eigen::MatrixXd Jg = restrict_free_cols(prob, cb.dg);
    Eigen::MatrixXd J(Jg.rows() + static_cast<Eigen::Index>(act.size()), Jg.cols());
    J.topRows(Jg.rows()) = Jg;
    if (!act.empty()) {
        const Eigen::MatrixXd Jq = restrict_free_cols(prob, cb.dq);
        for (std::size_t a = 0; a < act.size(); ++a) J.row(Jg.rows() + static_cast<Eigen::Index>(a)) = Jq.row(act[a]);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cut = rank_rel_tol * (sv.size() ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) rank += sv(k) > cut;
    if (rank < J.rows()) {
        std::ostringstream os;
        os << "rank-deficient equality Jacobian: rank " << rank << " of " << J.rows() << " rows";
        throw StationarityError(os.str());
    }
    return {svd.matrixV().rightCols(J.cols() - rank), act.size()};
}

double lagrangian(const OpfProblem& prob, const Eigen::VectorXd& z, const OpfSolution& sol) {
    const DecisionVector x = prob.from_free(z);
    const ConstraintBundle cb = evaluate_constraints(prob, x, false);
    double L = prob.objective(x) + sol.lambda_p.dot(cb.g.head(sol.lambda_p.size())) + sol.lambda_q.dot(cb.g.tail(sol.lambda_q.size()));
    L += sol.nu.dot(cb.q);
    if (cb.h.size()) L += sol.mu_stab.dot(cb.h);
    return L;
}

void require_matching(const OpfSolution& sol, const StabilityConstraintSet& set) {
    if (static_cast<std::size_t>(sol.mu_stab.size()) != set.size() || static_cast<std::size_t>(sol.h_values.size()) != set.size()) {
        throw std::invalid_argument("solution does not match the stability constraint set");
    }
}

}  // namespace

bool independently_binding(const OpfSolution& sol, std::size_t constraint, double binding_tol, double inactive_slack) {
    const auto l = static_cast<Eigen::Index>(constraint);
    if (l >= sol.h_values.size() || std::abs(sol.h_values(l)) > binding_tol) return false;
    for (Eigen::Index k = 0; k < sol.q_values.size(); ++k)
        if (sol.q_values(k) > -inactive_slack) return false;
    for (Eigen::Index k = 0; k < sol.h_values.size(); ++k)
        if (k != l && sol.h_values(k) > -inactive_slack) return false;
    return true;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::not_applicable: return "not_applicable";
    }
    return "unknown";
}

NsspReport compute_nssp(const OpfSolution& sol, const StabilityConstraintSet& set, double binding_tol) {
    require_matching(sol, set);
    const std::size_t n = set.red.size();
    NsspReport rep;
    rep.bus_id = set.red.kept_ids;
    rep.nssp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    rep.pairs.resize(n);
    rep.n_binding.assign(n, 0);
    for (std::size_t l = 0; l < set.size(); ++l) {
        const auto& c = set.constraints[l];
        const auto li = static_cast<Eigen::Index>(l);
        const NsspPair pr{l, c.i, c.j, sol.mu_stab(li), std::abs(sol.h_values(li)) <= binding_tol};
        rep.nssp(static_cast<Eigen::Index>(c.i)) += pr.lambda;
        rep.n_binding[c.i] += pr.binding;
        rep.pairs[c.i].push_back(pr);
    }
    return rep;
}

void write_nssp_csv(const NsspReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "bus,nssp,n_binding_pairs\n";
    char buf[64];
    for (std::size_t r = 0; r < report.bus_id.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.12e", report.nssp(static_cast<Eigen::Index>(r)));
        out << report.bus_id[r] << ',' << buf << ',' << report.n_binding[r] << '\n';
    }
}

MaxFormMultipliers aggregate_max_multiplier(const OpfSolution& sol, const StabilityConstraintSet& set) {
    require_matching(sol, set);
    const std::size_t n = set.red.size();
    MaxFormMultipliers agg;
    agg.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    agg.weights.resize(n);
    for (std::size_t l = 0; l < set.size(); ++l)
        agg.lambda(static_cast<Eigen::Index>(set.constraints[l].i)) += sol.mu_stab(static_cast<Eigen::Index>(l));
    for (std::size_t l = 0; l < set.size(); ++l) {
        const auto& c = set.constraints[l];
        const double m = sol.mu_stab(static_cast<Eigen::Index>(l));
        const double tot = agg.lambda(static_cast<Eigen::Index>(c.i));
        if (m > 0.0 && tot > 0.0) agg.weights[c.i].emplace_back(c.j, m / tot);
    }
    return agg;
}

double max_form_stationarity(const OpfProblem& prob, const OpfSolution& sol, const MaxFormMultipliers& agg) {
    if (!prob.stab) throw std::invalid_argument("problem has no stability constraints");
    const ConstraintBundle cb = evaluate_constraints(prob, sol.x, true);
    Eigen::VectorXd y(sol.lambda_p.size() + sol.lambda_q.size());
    y << sol.lambda_p, sol.lambda_q;
    Eigen::VectorXd g = prob.objective_gradient(sol.x) + cb.dg.transpose() * y + cb.dq.transpose() * sol.nu;
    const auto cv = static_cast<Eigen::Index>(2 * prob.n_gen());
    for (std::size_t r = 0; r < agg.weights.size(); ++r) {
        const double lam = agg.lambda(static_cast<Eigen::Index>(r));
        for (const auto& [j, w] : agg.weights[r]) {
            g(cv + static_cast<Eigen::Index>(prob.stab_bus[j])) += lam * w;
            g(cv + static_cast<Eigen::Index>(prob.stab_bus[r])) -= lam * w;
        }
    }
    return restrict_free(prob, g).cwiseAbs().maxCoeff();
}

Theorem1Check verify_theorem1(const OpfSolution& sol, const OpfProblem& prob, const Theorem1Options& opt) {
    Theorem1Check out;
    if (!sol.ok()) {
        out.reason = "solution is not optimal (" + to_string(sol.status) + ")";
        return out;
    }
    if (!prob.stab) {
        out.reason = "problem has no stability constraints";
        return out;
    }
    for (std::size_t k = 0; k < prob.n_gen(); ++k) {
        if (prob.cost.d_eff(k) != 0.0) {
            out.reason = "reactive power cost present at bus " + std::to_string(prob.net.buses[prob.gen_bus[k]].id);
            return out;
        }
    }
    for (Eigen::Index k = 0; k < sol.q_values.size(); ++k) {
        if (sol.q_values(k) > -opt.inactive_slack) {
            std::ostringstream os;
            os << "operational constraint " << describe(prob.ineq[static_cast<std::size_t>(k)], prob.net)
               << " not strictly inactive (slack " << -sol.q_values(k) << ")";
            out.reason = os.str();
            return out;
        }
    }
    for (Eigen::Index l = 0; l < sol.h_values.size(); ++l)
        if (std::abs(sol.h_values(l)) <= opt.binding_tol) out.binding.push_back(static_cast<std::size_t>(l));
    if (out.binding.empty()) {
        out.reason = "no binding stability constraint";
        return out;
    }

    // Positive linear independence: min |A c|^2 over the unit simplex.
    const auto nb = static_cast<Eigen::Index>(out.binding.size());
    const std::size_t nr = prob.stab->red.size();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(nr), nb);
    for (Eigen::Index a = 0; a < nb; ++a) A.col(a) = prob.stab->constraints[out.binding[static_cast<std::size_t>(a)]].alpha(nr);
    QpProblem qp;
    qp.H = A.transpose() * A + 1e-12 * Eigen::MatrixXd::Identity(nb, nb);
    qp.g = Eigen::VectorXd::Zero(nb);
    qp.Ae = Eigen::RowVectorXd::Ones(nb);
    qp.be = Eigen::VectorXd::Ones(1);
    qp.Ai = -Eigen::MatrixXd::Identity(nb, nb);
    qp.bi = Eigen::VectorXd::Zero(nb);
    const QpResult r = solve_qp(qp);
    if (r.status != QpStatus::optimal) {
        out.reason = "positive linear independence test failed: " + to_string(r.status);
        return out;
    }
    out.pli_distance = (A * r.x).norm();
    if (out.pli_distance <= opt.pli_tol) {
        out.reason = "binding stability gradients are not positively linearly independent";
        return out;
    }

    for (std::size_t l : out.binding) out.max_abs_mu = std::max(out.max_abs_mu, std::abs(sol.mu_stab(static_cast<Eigen::Index>(l))));
    out.lambda_p_spread = sol.lambda_p.maxCoeff() - sol.lambda_p.minCoeff();
    out.max_abs_lambda_q = sol.lambda_q.cwiseAbs().maxCoeff();
    std::ostringstream os;
    if (out.max_abs_mu > opt.mu_tol) os << "binding stability multiplier " << out.max_abs_mu << " exceeds " << opt.mu_tol << "; ";
    if (out.lambda_p_spread > opt.lambda_tol * std::max(1.0, sol.lambda_p.cwiseAbs().maxCoeff()))
        os << "lambda_P not uniform (spread " << out.lambda_p_spread << "); ";
    if (out.max_abs_lambda_q > opt.lambda_tol) os << "lambda_Q nonzero (" << out.max_abs_lambda_q << "); ";
    out.reason = os.str();
    out.verdict = out.reason.empty() ? Verdict::pass : Verdict::fail;
    if (out.verdict == Verdict::pass) out.reason = "hypotheses hold and binding stability constraints carry zero price";
    return out;
}

StationarityCheck verify_reduced_stationarity(const OpfSolution& sol, const OpfProblem& prob, std::size_t constraint,
                                              const StationarityOptions& opt) {
    if (!prob.stab || constraint >= prob.n_stab()) throw std::invalid_argument("stability constraint index out of range");
    if (std::abs(sol.h_values(static_cast<Eigen::Index>(constraint))) > opt.binding_tol) {
        throw StationarityError("stability constraint " + std::to_string(constraint) + " is not active");
    }
    for (std::size_t l = 0; l < prob.n_stab(); ++l) {
        if (l != constraint && std::abs(sol.h_values(static_cast<Eigen::Index>(l))) <= opt.binding_tol) {
            throw StationarityError("not independently binding: stability constraint " + std::to_string(l) + " is also active");
        }
    }
    const ConstraintBundle cb = evaluate_constraints(prob, sol.x, true);
    const Tangent t = tangent_space(prob, cb, opt.binding_tol, opt.rank_rel_tol);
    StationarityCheck out;
    out.basis = t.Z;
    out.tangent_basis_dim = static_cast<std::size_t>(t.Z.cols());
    out.n_active_operational = t.n_active_operational;
    const Eigen::VectorXd gf = restrict_free(prob, prob.objective_gradient(sol.x));
    const Eigen::VectorXd gh = restrict_free(prob, cb.dh.row(static_cast<Eigen::Index>(constraint)).transpose());
    out.projected_objective_gradient = t.Z.transpose() * gf;
    out.projected_constraint_gradient = t.Z.transpose() * gh;
    const Eigen::VectorXd& pf = out.projected_objective_gradient;
    const Eigen::VectorXd& ph = out.projected_constraint_gradient;
    out.reduced_gradient_norm = pf.norm();
    const double hh = ph.squaredNorm();
    out.implied_mu = hh > 0.0 ? -pf.dot(ph) / hh : 0.0;
    out.residual = (pf + out.implied_mu * ph).norm();

    if (opt.sosc_directions > 0 && t.Z.cols() > 0) {
        // Critical directions: tangent, and orthogonal to grad h when the price is positive.
        Eigen::MatrixXd C = t.Z;
        if (out.implied_mu > 1e-8 && hh > 0.0) {
            const Eigen::VectorXd u = ph / std::sqrt(hh);
            const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(ph.size(), ph.size()) - u * u.transpose();
            C = t.Z * P;
        }
        std::mt19937_64 rng(opt.seed);
        std::normal_distribution<double> nd;
        const Eigen::VectorXd z0 = prob.to_free(sol.x);
        const double L0 = lagrangian(prob, z0, sol);
        const double step = 1e-3;
        double cmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < opt.sosc_directions; ++k) {
            Eigen::VectorXd w(C.cols());
            for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = nd(rng);
            Eigen::VectorXd d = C * w;
            const double nrm = d.norm();
            if (nrm == 0.0) continue;
            d /= nrm;
            const double curv = (lagrangian(prob, z0 + step * d, sol) - 2.0 * L0 + lagrangian(prob, z0 - step * d, sol)) / (step * step);
            cmin = std::min(cmin, curv);
        }
        if (std::isfinite(cmin)) {
            out.min_curvature = cmin;
            out.sosc_positive = cmin > 1e-6;
        }
    }
    return out;
}

PositivePriceResult find_positive_price_costs(const OpfProblem& prob, const DecisionVector& target, std::size_t constraint,
                                              const PositivePriceOptions& opt) {
    if (!prob.stab || constraint >= prob.n_stab()) throw std::invalid_argument("stability constraint index out of range");
    const ConstraintBundle cb = evaluate_constraints(prob, target, true);
    const Tangent t = tangent_space(prob, cb, 1e-6, 1e-8);
    const auto ng = static_cast<Eigen::Index>(prob.n_gen());
    const Eigen::Index nrho = opt.allow_reactive ? 3 * ng : 2 * ng;

    // Objective gradient is linear in rho = (b, c, d): G rho.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(prob.n_full(), nrho);
    for (Eigen::Index k = 0; k < ng; ++k) {
        G(k, k) = 1.0;
        G(k, ng + k) = 2.0 * target.pg(k);
        if (opt.allow_reactive) G(ng + k, 2 * ng + k) = 2.0 * target.qg(k);
    }
    const Eigen::MatrixXd M = t.Z.transpose() * restrict_free_cols(prob, G.transpose()).transpose();
    const Eigen::VectorXd r0 = t.Z.transpose() * restrict_free(prob, cb.dh.row(static_cast<Eigen::Index>(constraint)).transpose());
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(nrho);
    lb.segment(ng, ng).setConstant(opt.c_floor);

    QpProblem qp;
    const Eigen::MatrixXd MtM = M.transpose() * M;
    qp.H = MtM + 1e-12 * std::max(1.0, MtM.norm()) * Eigen::MatrixXd::Identity(nrho, nrho);
    qp.g = M.transpose() * r0;
    qp.Ae.resize(0, nrho);
    qp.be.resize(0);
    qp.Ai = -Eigen::MatrixXd::Identity(nrho, nrho);
    qp.bi = -lb;
    const QpResult r = solve_qp(qp);

    PositivePriceResult out;
    if (r.status != QpStatus::optimal) {
        out.message = "least-squares cost fit failed: " + to_string(r.status);
        return out;
    }
    const Eigen::VectorXd res = M * r.x + r0;
    out.residual = res.norm() / std::max(1.0, r0.norm());
    out.cost = prob.cost;
    out.cost.eta_q.reset();
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        out.cost.b[kk] = r.x(k);
        out.cost.c[kk] = r.x(ng + k);
        out.cost.d[kk] = opt.allow_reactive ? r.x(2 * ng + k) : 0.0;
    }
    if (out.residual > opt.residual_tol) {
        out.certificate = res;
        std::ostringstream os;
        os << "no admissible cost coefficients: least-squares residual " << out.residual;
        out.message = os.str();
        return out;
    }
    if (opt.allow_reactive && r.x.tail(ng).maxCoeff() <= 0.0) {
        out.message = "fit uses no reactive power cost";
        return out;
    }

    // Verification: re-solve with the fitted costs.
    OpfProblem fitted = prob;
    fitted.cost = out.cost;
    std::vector<DecisionVector> starts{target};
    for (auto& s : default_starts(fitted)) starts.push_back(std::move(s));
    OpfSolution sol = solve(fitted, starts, opt.resolve.value_or(SolveOptions{}));
    out.resolved_mu = sol.ok() ? sol.mu_stab(static_cast<Eigen::Index>(constraint)) : 0.0;
    out.found = sol.ok() && out.resolved_mu > 0.0;
    out.message = out.found ? "fitted costs reproduce a positive stability price" : "re-solve with fitted costs gives no positive price";
    out.resolved = std::move(sol);
    return out;
}

namespace {

// Re-solves with the given bound shift applied and compares against -mu * delta.
MarginalPriceCheck resolve_shifted(const OpfProblem& shifted, const OpfSolution& sol, double mu, double delta, const SolveOptions& options) {
    std::vector<DecisionVector> starts{sol.x};
    for (auto& s : default_starts(shifted)) starts.push_back(std::move(s));
    const OpfSolution s2 = solve(shifted, starts, options);
    MarginalPriceCheck out;
    out.mu = mu;
    out.delta = delta;
    out.predicted = -mu * delta;
    out.actual = s2.objective - sol.objective;
    out.resolved_ok = s2.ok();
    out.rel_error = out.predicted != 0.0 ? std::abs(out.actual - out.predicted) / std::abs(out.predicted) : std::abs(out.actual);
    return out;
}

}  // namespace

MarginalPriceCheck check_marginal_price(const OpfProblem& prob, const OpfSolution& sol, std::size_t constraint, double delta,
                                        const SolveOptions& options) {
    if (!prob.stab || constraint >= prob.n_stab()) throw std::invalid_argument("stability constraint index out of range");
    OpfProblem shifted = prob;
    shifted.stab->constraints[constraint].gamma += delta;
    return resolve_shifted(shifted, sol, sol.mu_stab(static_cast<Eigen::Index>(constraint)), delta, options);
}

MarginalPriceCheck check_bus_marginal_price(const OpfProblem& prob, const OpfSolution& sol, std::size_t bus, double delta,
                                            const SolveOptions& options) {
    if (!prob.stab || bus >= prob.stab->red.size()) throw std::invalid_argument("reduced bus index out of range");
    OpfProblem shifted = prob;
    StabilityConstraintSet& set = *shifted.stab;
    set.gamma_bus(static_cast<Eigen::Index>(bus)) += delta;
    double mu = 0.0;
    for (std::size_t l = 0; l < set.size(); ++l)
        if (set.constraints[l].i == bus) {
            set.constraints[l].gamma += delta;
            mu += sol.mu_stab(static_cast<Eigen::Index>(l));
        }
    return resolve_shifted(shifted, sol, mu, delta, options);
}

}  // namespace stabopf
