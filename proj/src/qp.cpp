#include "stabopf/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stabopf {

std::string to_string(QpStatus s) {
    switch (s) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::max_iter: return "max_iter";
        case QpStatus::not_convex: return "not_convex";
        case QpStatus::dependent_equalities: return "dependent_equalities";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kViolTol = 1e-13;

// Working-set factorization: J = L^-T Q, and R upper triangular such that
// the first iq columns of J^T N equal R. Active entries are encoded as
// -(k+1) for equality k and k for inequality k.
class GoldfarbIdnani {
  public:
    explicit GoldfarbIdnani(const QpProblem& qp) : qp_(qp), n_(qp.g.size()) {}

    QpResult run(std::size_t max_iter);

  private:
    // Constraint normal in the internal form n^T x + c >= 0 (inequalities)
    // or n^T x + c = 0 (equalities).
    Eigen::VectorXd normal(int code) const {
        if (code < 0) return qp_.Ae.row(-code - 1).transpose();
        return -qp_.Ai.row(code).transpose();
    }
    double offset(int code) const {
        if (code < 0) return -qp_.be(-code - 1);
        return qp_.bi(code);
    }

    bool add_constraint(Eigen::VectorXd& d);
    void delete_constraint(int code);
    void reset_factorization();
    void direction(const Eigen::VectorXd& np, Eigen::VectorXd& d, Eigen::VectorXd& z, Eigen::VectorXd& r) const;

    const QpProblem& qp_;
    Eigen::Index n_;
    Eigen::MatrixXd J0_;
    Eigen::MatrixXd J_;
    Eigen::MatrixXd R_;
    std::vector<int> A_;
    Eigen::VectorXd u_;
    Eigen::Index iq_ = 0;
    double r_norm_ = 1.0;
};

void GoldfarbIdnani::reset_factorization() {
    J_ = J0_;
    R_.setZero();
    iq_ = 0;
    r_norm_ = 1.0;
}

void GoldfarbIdnani::direction(const Eigen::VectorXd& np, Eigen::VectorXd& d, Eigen::VectorXd& z, Eigen::VectorXd& r) const {
    d = J_.transpose() * np;
    z = J_.rightCols(n_ - iq_) * d.tail(n_ - iq_);
    r.setZero();
    if (iq_ > 0) r.head(iq_) = R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
}

bool GoldfarbIdnani::add_constraint(Eigen::VectorXd& d) {
    // Givens rotations zeroing d(iq+1..n-1), applied to the columns of J.
    for (Eigen::Index j = n_ - 1; j >= iq_ + 1; --j) {
        double cc = d(j - 1);
        double ss = d(j);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        d(j) = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d(j - 1) = -h;
        } else {
            d(j - 1) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (Eigen::Index k = 0; k < n_; ++k) {
            const double t1 = J_(k, j - 1);
            const double t2 = J_(k, j);
            J_(k, j - 1) = t1 * cc + t2 * ss;
            J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
        }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d(iq_ - 1)) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d(iq_ - 1)));
    return true;
}

void GoldfarbIdnani::delete_constraint(int code) {
    Eigen::Index qq = -1;
    for (Eigen::Index i = 0; i < iq_; ++i) {
        if (A_[static_cast<std::size_t>(i)] == code) {
            qq = i;
            break;
        }
    }
    if (qq < 0) throw std::logic_error("qp: constraint to drop is not in the working set");
    for (Eigen::Index i = qq; i < iq_ - 1; ++i) {
        A_[static_cast<std::size_t>(i)] = A_[static_cast<std::size_t>(i + 1)];
        u_(i) = u_(i + 1);
        R_.col(i) = R_.col(i + 1);
    }
    A_[static_cast<std::size_t>(iq_ - 1)] = A_[static_cast<std::size_t>(iq_)];
    u_(iq_ - 1) = u_(iq_);
    A_[static_cast<std::size_t>(iq_)] = 0;
    u_(iq_) = 0.0;
    for (Eigen::Index j = 0; j < iq_; ++j) R_(j, iq_ - 1) = 0.0;
    --iq_;
    if (iq_ == 0) return;
    // Restore triangularity of R; rotate J to match.
    for (Eigen::Index j = qq; j < iq_; ++j) {
        double cc = R_(j, j);
        double ss = R_(j + 1, j);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        cc /= h;
        ss /= h;
        R_(j + 1, j) = 0.0;
        if (cc < 0.0) {
            R_(j, j) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            R_(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (Eigen::Index k = j + 1; k < iq_; ++k) {
            const double t1 = R_(j, k);
            const double t2 = R_(j + 1, k);
            R_(j, k) = t1 * cc + t2 * ss;
            R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
        }
        for (Eigen::Index k = 0; k < n_; ++k) {
            const double t1 = J_(k, j);
            const double t2 = J_(k, j + 1);
            J_(k, j) = t1 * cc + t2 * ss;
            J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
        }
    }
}

QpResult GoldfarbIdnani::run(std::size_t max_iter) {
    const Eigen::Index me = qp_.Ae.rows();
    const Eigen::Index mi = qp_.Ai.rows();
    QpResult res;
    res.x = Eigen::VectorXd::Zero(n_);
    res.y = Eigen::VectorXd::Zero(me);
    res.mu = Eigen::VectorXd::Zero(mi);
    if (qp_.H.rows() != n_ || qp_.H.cols() != n_ || (me > 0 && qp_.Ae.cols() != n_) || (mi > 0 && qp_.Ai.cols() != n_) ||
        qp_.be.size() != me || qp_.bi.size() != mi) {
        throw std::invalid_argument("qp: inconsistent dimensions");
    }
    if (max_iter == 0) max_iter = static_cast<std::size_t>(50 * (n_ + me + mi) + 1000);

    const Eigen::LLT<Eigen::MatrixXd> llt(qp_.H);
    if (llt.info() != Eigen::Success) {
        res.status = QpStatus::not_convex;
        return res;
    }
    const Eigen::MatrixXd L = llt.matrixL();
    J0_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n_, n_));
    R_ = Eigen::MatrixXd::Zero(n_, n_);
    A_.assign(static_cast<std::size_t>(me + mi + 1), 0);
    u_ = Eigen::VectorXd::Zero(me + mi + 1);
    reset_factorization();

    Eigen::VectorXd x = -(J0_ * (J0_.transpose() * qp_.g));
    Eigen::VectorXd d(n_), z(n_), r(me + mi + 1);

    for (Eigen::Index i = 0; i < me; ++i) {
        const int code = -static_cast<int>(i) - 1;
        const Eigen::VectorXd np = normal(code);
        direction(np, d, z, r);
        double t2 = 0.0;
        if (z.dot(z) > kEps) t2 = (-np.dot(x) - offset(code)) / z.dot(np);
        x += t2 * z;
        u_(iq_) = t2;
        if (iq_ > 0) u_.head(iq_) -= t2 * r.head(iq_);
        A_[static_cast<std::size_t>(iq_)] = code;
        if (!add_constraint(d)) {
            res.status = QpStatus::dependent_equalities;
            res.x = x;
            return res;
        }
    }

    std::vector<char> in_set(static_cast<std::size_t>(mi), 0);
    Eigen::VectorXd s(mi);
    Eigen::VectorXd vtol = Eigen::VectorXd::Zero(mi);
    std::vector<int> a_old;
    Eigen::VectorXd u_old;
    Eigen::VectorXd x_old;
    Eigen::Index iq_old = 0;
    std::size_t iter = 0;

    auto finish = [&](QpStatus st) {
        res.status = st;
        res.x = x;
        res.iterations = iter;
        for (Eigen::Index k = 0; k < iq_; ++k) {
            const int code = A_[static_cast<std::size_t>(k)];
            if (code < 0) {
                res.y(-code - 1) = -u_(k);
            } else {
                res.mu(code) = u_(k);
                res.active.push_back(static_cast<std::size_t>(code));
            }
        }
        res.objective = 0.5 * x.dot(qp_.H * x) + qp_.g.dot(x);
        return res;
    };

    while (true) {
        // Step 1: constraint values; stop when none is violated.
        for (std::size_t k = 0; k < in_set.size(); ++k) in_set[k] = 0;
        for (Eigen::Index k = 0; k < iq_; ++k) {
            const int code = A_[static_cast<std::size_t>(k)];
            if (code >= 0) in_set[static_cast<std::size_t>(code)] = 1;
        }
        // Violations below a rounding-level tolerance per constraint are ignored.
        bool violated = false;
        const double xn = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
        for (Eigen::Index i = 0; i < mi; ++i) {
            const Eigen::VectorXd ni = normal(static_cast<int>(i));
            s(i) = ni.dot(x) + offset(static_cast<int>(i));
            vtol(i) = kViolTol * (1.0 + std::abs(offset(static_cast<int>(i))) + ni.cwiseAbs().maxCoeff() * xn);
            violated = violated || s(i) < -vtol(i);
        }
        if (!violated) return finish(QpStatus::optimal);
        a_old.assign(A_.begin(), A_.begin() + iq_);
        u_old = u_.head(iq_);
        x_old = x;
        iq_old = iq_;
        std::vector<char> excluded(static_cast<std::size_t>(mi), 0);

        bool restart = false;
        while (!restart) {
            // Step 2: most violated constraint not yet in the working set.
            double ss = 0.0;
            Eigen::Index ip = -1;
            for (Eigen::Index i = 0; i < mi; ++i) {
                if (s(i) < ss && s(i) < -vtol(i) && !in_set[static_cast<std::size_t>(i)] && !excluded[static_cast<std::size_t>(i)]) {
                    ss = s(i);
                    ip = i;
                }
            }
            if (ip < 0) return finish(QpStatus::optimal);
            const int pcode = static_cast<int>(ip);
            const Eigen::VectorXd np = normal(pcode);
            u_(iq_) = 0.0;
            A_[static_cast<std::size_t>(iq_)] = pcode;

            while (true) {
                if (++iter > max_iter) return finish(QpStatus::max_iter);
                direction(np, d, z, r);
                // Largest dual step keeping working-set inequality multipliers >= 0.
                double t1 = kInf;
                int l = -1;
                for (Eigen::Index k = 0; k < iq_; ++k) {
                    const int code = A_[static_cast<std::size_t>(k)];
                    if (code < 0) continue;
                    if (r(k) > 0.0 && u_(k) / r(k) < t1) {
                        t1 = u_(k) / r(k);
                        l = code;
                    }
                }
                const double t2 = std::abs(z.dot(z)) > kEps ? -s(ip) / z.dot(np) : kInf;
                const double t = std::min(t1, t2);
                if (t >= kInf) return finish(QpStatus::infeasible);

                if (t2 >= kInf) {
                    // Dual step only.
                    if (iq_ > 0) u_.head(iq_) -= t * r.head(iq_);
                    u_(iq_) += t;
                    in_set[static_cast<std::size_t>(l)] = 0;
                    delete_constraint(l);
                    continue;
                }
                x += t * z;
                if (iq_ > 0) u_.head(iq_) -= t * r.head(iq_);
                u_(iq_) += t;
                if (t == t2) {
                    if (add_constraint(d)) {
                        in_set[static_cast<std::size_t>(ip)] = 1;
                        restart = true;
                    } else {
                        // Degenerate: rebuild the step-1 working set and skip ip.
                        excluded[static_cast<std::size_t>(ip)] = 1;
                        reset_factorization();
                        for (std::size_t k = 0; k < a_old.size(); ++k) {
                            A_[k] = a_old[k];
                            Eigen::VectorXd dk = J_.transpose() * normal(a_old[k]);
                            add_constraint(dk);
                        }
                        u_.setZero();
                        u_.head(iq_old) = u_old;
                        x = x_old;
                        for (std::size_t k = 0; k < in_set.size(); ++k) in_set[k] = 0;
                        for (int code : a_old) {
                            if (code >= 0) in_set[static_cast<std::size_t>(code)] = 1;
                        }
                        for (Eigen::Index i = 0; i < mi; ++i) {
                            s(i) = normal(static_cast<int>(i)).dot(x) + offset(static_cast<int>(i));
                        }
                    }
                    break;
                }
                // Partial step: drop the blocking constraint and retry ip.
                in_set[static_cast<std::size_t>(l)] = 0;
                delete_constraint(l);
                s(ip) = np.dot(x) + offset(pcode);
            }
        }
    }
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, std::size_t max_iter) {
    GoldfarbIdnani gi(qp);
    return gi.run(max_iter);
}

}  // namespace stabopf
