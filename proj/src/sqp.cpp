#include "stabopf/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stabopf/qp.hpp"

namespace stabopf {

std::string to_string(SqpStatus s) {
    switch (s) {
        case SqpStatus::optimal: return "optimal";
        case SqpStatus::acceptable: return "acceptable";
        case SqpStatus::infeasible: return "infeasible";
        case SqpStatus::max_iter: return "max_iter";
        case SqpStatus::degenerate: return "degenerate";
        case SqpStatus::failed: return "failed";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kConditionFloor = 1e-8;

double violation(const Eigen::VectorXd& ce, const Eigen::VectorXd& ci) {
    double v = ce.cwiseAbs().sum();
    for (Eigen::Index k = 0; k < ci.size(); ++k) v += std::max(0.0, ci(k));
    return v;
}

double max_violation(const Eigen::VectorXd& ce, const Eigen::VectorXd& ci) {
    double v = ce.size() ? ce.cwiseAbs().maxCoeff() : 0.0;
    if (ci.size()) v = std::max(v, ci.maxCoeff());
    return std::max(v, 0.0);
}

struct Residuals {
    double stationarity = 0.0;
    double feasibility = 0.0;
    double complementarity = 0.0;
    double dual = 0.0;  // most negative inequality multiplier, as a positive number
    double kkt() const { return std::max({stationarity, feasibility, complementarity, dual}); }
};

Residuals residuals(const NlpEvaluation& e, double sigma, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    Residuals r;
    Eigen::VectorXd g = sigma * e.grad;
    if (y.size()) g.noalias() += e.Je.transpose() * y;
    if (mu.size()) g.noalias() += e.Ji.transpose() * mu;
    r.stationarity = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    r.feasibility = max_violation(e.ce, e.ci);
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
        r.complementarity = std::max(r.complementarity, std::abs(mu(k) * e.ci(k)));
        r.dual = std::max(r.dual, -mu(k));
    }
    return r;
}

// Least-squares multipliers on the weakly active set at the current point.
// Rows whose multiplier comes out negative are dropped one at a time and the
// fit repeated, so the result is always sign-feasible.
void ls_multipliers(const NlpEvaluation& e, double sigma, double active_tol, double rank_tol, Eigen::VectorXd& y,
                    Eigen::VectorXd& mu) {
    const Eigen::Index n = e.grad.size();
    const Eigen::Index me = e.ce.size();
    std::vector<Eigen::Index> rows;
    for (Eigen::Index k = 0; k < e.ci.size(); ++k)
        if (std::abs(e.ci(k)) <= active_tol) rows.push_back(k);
    y = Eigen::VectorXd::Zero(me);
    mu = Eigen::VectorXd::Zero(e.ci.size());
    for (;;) {
        const Eigen::Index na = me + static_cast<Eigen::Index>(rows.size());
        if (na == 0) return;
        Eigen::MatrixXd G(n, na);
        if (me) G.leftCols(me) = e.Je.transpose();
        for (std::size_t a = 0; a < rows.size(); ++a) G.col(me + static_cast<Eigen::Index>(a)) = e.Ji.row(rows[a]).transpose();
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
        cod.setThreshold(rank_tol);
        const Eigen::VectorXd lam = cod.solve(-sigma * e.grad);
        std::size_t worst = rows.size();
        double most_negative = 0.0;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            const double v = lam(me + static_cast<Eigen::Index>(a));
            if (v < most_negative) {
                most_negative = v;
                worst = a;
            }
        }
        if (worst == rows.size()) {
            y = lam.head(me);
            mu.setZero();
            for (std::size_t a = 0; a < rows.size(); ++a) mu(rows[a]) = lam(me + static_cast<Eigen::Index>(a));
            return;
        }
        rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(worst));
    }
}

struct Step {
    bool ok = false;
    QpStatus status = QpStatus::infeasible;
    Eigen::VectorXd d;
    Eigen::VectorXd y;
    Eigen::VectorXd mu;
    std::vector<std::size_t> active;
    double theta = 1.0;
};

// QP subproblem around the current linearization. theta < 1 relaxes the
// equality residuals and violated inequalities so the subproblem stays
// feasible; `box` caps |d_k| when finite.
Step subproblem(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& ce, const Eigen::MatrixXd& Je,
                const Eigen::VectorXd& ci, const Eigen::MatrixXd& Ji, double box, bool allow_relaxation) {
    const Eigen::Index n = g.size();
    const Eigen::Index mi = ci.size();
    const Eigen::Index nbox = std::isfinite(box) ? 2 * n : 0;
    Step st;
    const double thetas[] = {1.0, 0.5, 0.1, 0.01, 0.0};
    for (double theta : thetas) {
        QpProblem qp;
        qp.H = H;
        qp.g = g;
        qp.Ae = Je;
        qp.be = -theta * ce;
        qp.Ai.resize(mi + nbox, n);
        qp.bi.resize(mi + nbox);
        if (mi) qp.Ai.topRows(mi) = Ji;
        for (Eigen::Index k = 0; k < mi; ++k) qp.bi(k) = -(ci(k) > 0.0 ? theta * ci(k) : ci(k));
        if (nbox) {
            qp.Ai.bottomRows(nbox).setZero();
            for (Eigen::Index k = 0; k < n; ++k) {
                qp.Ai(mi + k, k) = 1.0;
                qp.Ai(mi + n + k, k) = -1.0;
            }
            qp.bi.tail(nbox).setConstant(box);
        }
        const QpResult r = solve_qp(qp);
        st.status = r.status;
        if (r.status == QpStatus::optimal) {
            st.ok = true;
            st.d = r.x;
            st.y = r.y;
            st.mu = r.mu.head(mi);
            for (std::size_t k : r.active) {
                if (static_cast<Eigen::Index>(k) < mi) st.active.push_back(k);
            }
            st.theta = theta;
            return st;
        }
        if (r.status != QpStatus::infeasible || !allow_relaxation) return st;
    }
    return st;
}

void damped_bfgs(Eigen::MatrixXd& H, const Eigen::VectorXd& s, const Eigen::VectorXd& yv) {
    const Eigen::VectorXd Hs = H * s;
    const double sHs = s.dot(Hs);
    if (!(sHs > 0.0)) return;
    const double sy = s.dot(yv);
    Eigen::VectorXd r = yv;
    if (sy < 0.2 * sHs) {
        const double th = 0.8 * sHs / (sHs - sy);
        r = th * yv + (1.0 - th) * Hs;
    }
    const double sr = s.dot(r);
    if (!(sr > 0.0)) return;
    H.noalias() += r * r.transpose() / sr;
    H.noalias() -= Hs * Hs.transpose() / sHs;
    H = 0.5 * (H + H.transpose()).eval();
    // Keep the QP Hessian well conditioned: flat directions otherwise drive
    // its smallest eigenvalues toward zero and the QP loses accuracy.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const double floor = kConditionFloor * es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < floor) {
        const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
        H = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        H = 0.5 * (H + H.transpose()).eval();
    }
}

}  // namespace

SqpResult solve_sqp(const Nlp& nlp, const Eigen::VectorXd& x0, const SqpOptions& opt) {
    const Eigen::Index n = nlp.n_vars();
    const Eigen::Index me = nlp.n_eq();
    const Eigen::Index mi = nlp.n_ineq();
    if (x0.size() != n) throw std::invalid_argument("sqp: start has the wrong dimension");

    SqpResult res;
    Eigen::VectorXd x = x0;
    NlpEvaluation ev;
    nlp.evaluate(x, ev, true);
    if (!std::isfinite(ev.f) || !ev.grad.allFinite()) {
        res.status = SqpStatus::failed;
        res.x = x;
        res.y = Eigen::VectorXd::Zero(me);
        res.mu = Eigen::VectorXd::Zero(mi);
        res.kkt_residual = kInf;
        res.message = "non-finite objective at the start";
        return res;
    }
    const double sigma = 1.0 / std::max(1.0, ev.grad.cwiseAbs().maxCoeff());
    res.objective_scale = sigma;

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool h_fresh = true;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(mi);
    double rho = 1.0;
    bool have_multipliers = false;
    bool stalled = false;
    bool h_fresh_at_stall = false;
    std::size_t it = 0;

    auto merit = [&](const NlpEvaluation& e) { return sigma * e.f + rho * violation(e.ce, e.ci); };

    for (; it < opt.max_iter; ++it) {
        if (have_multipliers) {
            if (residuals(ev, sigma, y, mu).kkt() <= opt.tol) break;
            Eigen::VectorXd yl, ml;
            ls_multipliers(ev, sigma, opt.active_tol, opt.rank_tol, yl, ml);
            if (residuals(ev, sigma, yl, ml).kkt() <= opt.tol) {
                y = std::move(yl);
                mu = std::move(ml);
                break;
            }
        }

        const Eigen::VectorXd g = sigma * ev.grad;
        Step st = subproblem(H, g, ev.ce, ev.Je, ev.ci, ev.Ji, kInf, true);
        if (st.ok && st.d.cwiseAbs().maxCoeff() > opt.step_box) {
            Step boxed = subproblem(H, g, ev.ce, ev.Je, ev.ci, ev.Ji, opt.step_box, true);
            if (boxed.ok) st = boxed;
        }
        if (!st.ok) {
            if (!h_fresh) {
                H.setIdentity();
                h_fresh = true;
                continue;
            }
            res.message = "QP subproblem failed: " + to_string(st.status);
            stalled = true;
            break;
        }
        const Eigen::VectorXd& d = st.d;

        const Eigen::VectorXd ce_lin = ev.ce + ev.Je * d;
        const Eigen::VectorXd ci_lin = ev.ci + ev.Ji * d;
        const double viol = violation(ev.ce, ev.ci);
        const double reduction = viol - violation(ce_lin, ci_lin);
        const double gd = g.dot(d);
        const double dHd = d.dot(H * d);
        const double lam_norm = std::max(st.y.size() ? st.y.cwiseAbs().maxCoeff() : 0.0, st.mu.size() ? st.mu.cwiseAbs().maxCoeff() : 0.0);
        double rho_need = lam_norm;
        if (reduction > 1e-14) rho_need = std::max(rho_need, (gd + 0.5 * dHd) / (0.5 * reduction));
        if (rho < rho_need) rho = 1.1 * rho_need + 1e-8;
        const double D = gd - rho * reduction;
        const double phi0 = merit(ev);
        // Merit changes below rounding of phi0 cannot be resolved.
        const double fuzz = 1e2 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi0));

        NlpEvaluation trial;
        Eigen::VectorXd x_new;
        bool accepted = false;
        const double armijo = 1e-4;
        x_new = x + d;
        nlp.evaluate(x_new, trial, false);
        if (std::isfinite(trial.f) && merit(trial) <= phi0 + armijo * D + fuzz) {
            accepted = true;
        } else {
            // Second-order correction on the full step.
            const Eigen::VectorXd ce_soc = trial.ce - ev.Je * d;
            const Eigen::VectorXd ci_soc = trial.ci - ev.Ji * d;
            const Step soc = subproblem(H, g, ce_soc, ev.Je, ci_soc, ev.Ji, kInf, false);
            if (soc.ok && trial.ce.allFinite()) {
                const Eigen::VectorXd x_soc = x + soc.d;
                NlpEvaluation es;
                nlp.evaluate(x_soc, es, false);
                if (std::isfinite(es.f) && merit(es) <= phi0 + armijo * D + fuzz) {
                    accepted = true;
                    x_new = x_soc;
                }
            }
            double alpha = 0.5;
            while (!accepted && alpha > 1e-12) {
                x_new = x + alpha * d;
                nlp.evaluate(x_new, trial, false);
                if (std::isfinite(trial.f) && merit(trial) <= phi0 + armijo * alpha * D + fuzz) accepted = true;
                else alpha *= 0.5;
            }
        }
        if (!accepted) {
            if (!h_fresh) {
                H.setIdentity();
                h_fresh = true;
                continue;
            }
            res.message = "line search failed";
            // Multipliers of this QP still describe the current point best.
            y = st.y;
            mu = st.mu;
            have_multipliers = true;
            stalled = true;
            break;
        }

        NlpEvaluation ev_new;
        nlp.evaluate(x_new, ev_new, true);
        const Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd gl_new = sigma * ev_new.grad;
        Eigen::VectorXd gl_old = g;
        if (me) {
            gl_new.noalias() += ev_new.Je.transpose() * st.y;
            gl_old.noalias() += ev.Je.transpose() * st.y;
        }
        if (mi) {
            gl_new.noalias() += ev_new.Ji.transpose() * st.mu;
            gl_old.noalias() += ev.Ji.transpose() * st.mu;
        }
        const Eigen::VectorXd yv = gl_new - gl_old;
        if (h_fresh) {
            const double sy = s.dot(yv);
            if (sy > 0.0) H = (yv.dot(yv) / sy) * Eigen::MatrixXd::Identity(n, n);
        }
        damped_bfgs(H, s, yv);
        h_fresh = false;

        x = x_new;
        ev = std::move(ev_new);
        y = st.y;
        mu = st.mu;
        have_multipliers = true;
        if (s.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + x.cwiseAbs().maxCoeff())) {
            // A vanishing step away from a KKT point usually means a badly
            // scaled quasi-Newton matrix; restart it once before giving up.
            if (!h_fresh_at_stall && residuals(ev, sigma, y, mu).kkt() > opt.tol) {
                H.setIdentity();
                h_fresh = true;
                h_fresh_at_stall = true;
                continue;
            }
            res.message = "step below machine precision";
            ++it;
            stalled = true;
            break;
        }
    }

    if (have_multipliers) {
        Eigen::VectorXd yl, ml;
        ls_multipliers(ev, sigma, opt.active_tol, opt.rank_tol, yl, ml);
        if (residuals(ev, sigma, yl, ml).kkt() < residuals(ev, sigma, y, mu).kkt()) {
            y = std::move(yl);
            mu = std::move(ml);
        }
    }
    const Residuals r = residuals(ev, sigma, y, mu);
    res.x = x;
    res.f = ev.f;
    res.iterations = it;
    res.stationarity = r.stationarity;
    res.feasibility = r.feasibility;
    res.complementarity = r.complementarity;
    res.kkt_residual = r.kkt();
    if (r.kkt() <= opt.tol) {
        res.status = SqpStatus::optimal;
    } else if (r.kkt() <= opt.acceptable_tol) {
        res.status = SqpStatus::acceptable;
    } else if (r.feasibility > opt.acceptable_tol && stalled) {
        res.status = SqpStatus::infeasible;
    } else {
        res.status = stalled ? SqpStatus::failed : SqpStatus::max_iter;
    }

    // Rank of the active constraint gradients.
    std::vector<Eigen::Index> act_rows;
    for (Eigen::Index k = 0; k < mi; ++k) {
        if (std::abs(ev.ci(k)) <= opt.active_tol) act_rows.push_back(k);
    }
    const Eigen::Index na = me + static_cast<Eigen::Index>(act_rows.size());
    if (na > 0) {
        Eigen::MatrixXd G(n, na);
        if (me) G.leftCols(me) = ev.Je.transpose();
        for (std::size_t a = 0; a < act_rows.size(); ++a) G.col(me + static_cast<Eigen::Index>(a)) = ev.Ji.row(act_rows[a]).transpose();
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        const double smax = sv(0);
        const double smin = sv(sv.size() - 1);
        res.active_condition = smin > 0.0 ? smax / smin : kInf;
        const bool deficient = na > n || smin <= opt.rank_tol * smax;
        if (deficient && (res.status == SqpStatus::optimal || res.status == SqpStatus::acceptable)) {
            // Least-norm multipliers on the active set.
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
            cod.setThreshold(opt.rank_tol);
            const Eigen::VectorXd lam = cod.solve(-sigma * ev.grad);
            y = lam.head(me);
            mu.setZero();
            for (std::size_t a = 0; a < act_rows.size(); ++a) mu(act_rows[a]) = lam(me + static_cast<Eigen::Index>(a));
            const Residuals rd = residuals(ev, sigma, y, mu);
            res.stationarity = rd.stationarity;
            res.complementarity = rd.complementarity;
            res.kkt_residual = rd.kkt();
            res.status = SqpStatus::degenerate;
            res.message = "active constraint gradients are rank deficient";
        }
    }
    res.y = y / sigma;
    res.mu = mu / sigma;
    res.active_ineq.assign(act_rows.begin(), act_rows.end());
    return res;
}

}  // namespace stabopf
