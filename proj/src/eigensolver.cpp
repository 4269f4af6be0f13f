#include "stabopf/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stabopf {

namespace {

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

[[noreturn]] void fail(const Eigen::MatrixXd& original, std::size_t active, const std::string& why) {
    double cond = std::numeric_limits<double>::quiet_NaN();
    if (original.allFinite()) {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(original);
        const auto& sv = svd.singularValues();
        cond = sv.size() == 0 || sv(sv.size() - 1) == 0.0 ? std::numeric_limits<double>::infinity() : sv(0) / sv(sv.size() - 1);
    }
    std::ostringstream msg;
    msg << why << " (n = " << original.rows() << ", active block " << active << ", ||A||_F = " << original.norm()
        << ", cond_2 = " << cond << ")";
    throw EigenError(msg.str(), cond, original.norm(), active);
}

}  // namespace

Eigen::VectorXd balance(Eigen::MatrixXd& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    const Eigen::Index n = a.rows();
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double r = 0.0;
            double c = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                scale(i) *= f;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return scale;
}

void to_hessenberg(Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index k = 0; k + 2 < n; ++k) {
        const Eigen::Index m = n - k - 1;
        Eigen::VectorXd v = a.col(k).tail(m);
        const double xnorm = v.norm();
        if (xnorm == 0.0) continue;
        const double alpha = -sign_of(xnorm, v(0));
        v(0) -= alpha;
        const double vnorm = v.norm();
        if (vnorm == 0.0) continue;
        v /= vnorm;
        // H <- P H P with P = I - 2 v v^T acting on rows/cols k+1..n-1.
        const Eigen::RowVectorXd w = v.transpose() * a.bottomRightCorner(m, n - k);
        a.bottomRightCorner(m, n - k).noalias() -= 2.0 * v * w;
        const Eigen::VectorXd u = a.rightCols(m) * v;
        a.rightCols(m).noalias() -= 2.0 * u * v.transpose();
        a(k + 1, k) = alpha;
        a.col(k).tail(m - 1).setZero();
    }
}

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A, int max_iterations_per_eigenvalue) {
    if (A.rows() != A.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
    if (!A.allFinite()) fail(A, static_cast<std::size_t>(A.rows()), "eigenvalues: non-finite matrix entries");
    const int n = static_cast<int>(A.rows());
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    if (n == 0) return w;

    Eigen::MatrixXd a = A;
    balance(a);
    to_hessenberg(a);

    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

    int nn = n - 1;
    double t = 0.0;
    double p = 0.0, q = 0.0, r = 0.0, s = 0.0, x = 0.0, y = 0.0, z = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            // Look for a single small subdiagonal element.
            for (l = nn; l > 0; --l) {
                s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            x = a(nn, nn);
            if (l == nn) {
                w[static_cast<std::size_t>(nn)] = x + t;
                --nn;
            } else {
                y = a(nn - 1, nn - 1);
                const double ww = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        w[static_cast<std::size_t>(nn - 1)] = x + z;
                        w[static_cast<std::size_t>(nn)] = z != 0.0 ? x - ww / z : x + z;
                    } else {
                        w[static_cast<std::size_t>(nn)] = {x + p, -z};
                        w[static_cast<std::size_t>(nn - 1)] = {x + p, z};
                    }
                    nn -= 2;
                } else {
                    if (its == max_iterations_per_eigenvalue) {
                        fail(A, static_cast<std::size_t>(nn - l + 1), "eigenvalues: QR iteration did not converge");
                    }
                    double wshift = ww;
                    if (its == 10 || its == 20 || (its > 20 && its % 10 == 0)) {
                        // Exceptional shift.
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        x = y = 0.75 * s;
                        wshift = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - wshift) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        a(i + 2, i) = 0.0;
                        if (i != m) a(i + 2, i - 1) = 0.0;
                    }
                    // Double-shift QR sweep on rows/cols l..nn.
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = k + 1 != nn ? a(k + 2, k - 1) : 0.0;
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = a(k, j) + q * a(k + 1, j);
                            if (k + 1 != nn) {
                                p += r * a(k + 2, j);
                                a(k + 2, j) -= p * z;
                            }
                            a(k + 1, j) -= p * y;
                            a(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * a(i, k) + y * a(i, k + 1);
                            if (k + 1 != nn) {
                                p += z * a(i, k + 2);
                                a(i, k + 2) -= p * r;
                            }
                            a(i, k + 1) -= p * q;
                            a(i, k) -= p;
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    return w;
}

EigenReport eigen_stability(const Eigen::MatrixXd& A, double zero_tol) {
    EigenReport rep;
    rep.eigenvalues = eigenvalues(A);
    if (rep.eigenvalues.empty()) {
        rep.max_re = -std::numeric_limits<double>::infinity();
        rep.stable = true;
        return rep;
    }
    std::size_t kmin = 0;
    for (std::size_t k = 1; k < rep.eigenvalues.size(); ++k) {
        if (std::abs(rep.eigenvalues[k]) < std::abs(rep.eigenvalues[kmin])) kmin = k;
    }
    rep.smallest_modulus = std::abs(rep.eigenvalues[kmin]);
    if (rep.smallest_modulus <= zero_tol) {
        rep.trivial_zero_index = kmin;
    } else {
        rep.trivial_mode_missing = true;
    }
    rep.max_re = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rep.eigenvalues.size(); ++k) {
        if (rep.trivial_zero_index && k == *rep.trivial_zero_index) continue;
        rep.max_re = std::max(rep.max_re, rep.eigenvalues[k].real());
    }
    rep.stable = rep.max_re < 0.0;
    return rep;
}

}  // namespace stabopf
