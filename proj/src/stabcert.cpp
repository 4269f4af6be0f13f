#include "stabopf/stabcert.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <thread>

#include "stabopf/eigensolver.hpp"

namespace stabopf {

Eigen::VectorXd StabilityConstraint::alpha(std::size_t n) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    a(static_cast<Eigen::Index>(j)) = 1.0;
    a(static_cast<Eigen::Index>(i)) = -1.0;
    return a;
}

StabilityConstraintSet build_constraints_with_gamma(const ReducedNetwork& red, const Eigen::VectorXd& gamma_bus) {
    if (static_cast<std::size_t>(gamma_bus.size()) != red.size()) {
        throw std::invalid_argument("need one stability bound per reduced bus");
    }
    StabilityConstraintSet set;
    set.red = red;
    set.gamma_bus = gamma_bus;
    for (std::size_t i = 0; i < red.size(); ++i) {
        const double g = gamma_bus(static_cast<Eigen::Index>(i));
        if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("stability bound must be positive and finite");
        for (std::size_t j : red.neighbors[i]) set.constraints.push_back({i, j, g});
    }
    return set;
}

StabilityConstraintSet build_constraints(const ReducedNetwork& red, const std::vector<InverterParams>& params) {
    if (params.size() != red.size()) throw std::invalid_argument("need one InverterParams per reduced bus");
    Eigen::VectorXd gamma(static_cast<Eigen::Index>(red.size()));
    for (std::size_t i = 0; i < red.size(); ++i) {
        params[i].validate();
        const auto k = static_cast<Eigen::Index>(i);
        const double bii = std::abs(red.B(k, k));
        if (bii == 0.0) {
            throw std::invalid_argument("reduced diagonal susceptance of bus " + std::to_string(red.kept_ids[i]) +
                                        " is zero; stability bound undefined");
        }
        gamma(k) = 1.0 / (2.0 * params[i].m_q * params[i].beta_q * bii);
    }
    return build_constraints_with_gamma(red, gamma);
}

MarginReport evaluate_margins(const StabilityConstraintSet& set, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != set.red.size()) throw std::invalid_argument("voltage vector dimension mismatch");
    MarginReport rep;
    rep.slack.resize(static_cast<Eigen::Index>(set.size()));
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < set.size(); ++l) {
        const auto& c = set.constraints[l];
        const double s = c.gamma - (v(static_cast<Eigen::Index>(c.j)) - v(static_cast<Eigen::Index>(c.i)));
        rep.slack(static_cast<Eigen::Index>(l)) = s;
        if (s < rep.min_margin) {
            rep.min_margin = s;
            rep.argmin = l;
        }
    }
    rep.certified = rep.min_margin >= 0.0;
    return rep;
}

Eigen::VectorXd max_form_values(const StabilityConstraintSet& set, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != set.red.size()) throw std::invalid_argument("voltage vector dimension mismatch");
    const auto n = static_cast<Eigen::Index>(set.red.size());
    Eigen::VectorXd psi = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nb = set.red.neighbors[static_cast<std::size_t>(i)];
        if (nb.empty()) continue;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t j : nb) worst = std::max(worst, v(static_cast<Eigen::Index>(j)) - v(i));
        psi(i) = worst - set.gamma_bus(i);
    }
    return psi;
}

double ScanAxis::at(std::size_t k) const {
    return count <= 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
}

std::vector<double> ScanAxis::points() const {
    if (count == 0) throw std::invalid_argument("scan axis must have at least one point");
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = at(k);
    return out;
}

std::size_t ScanGrid::size() const {
    std::size_t s = 1;
    for (const auto& a : v) s *= a.count;
    for (const auto& a : theta) s *= a.count;
    return s;
}

void grid_point(const ScanGrid& grid, std::size_t k, Eigen::VectorXd& v, Eigen::VectorXd& theta) {
    const std::size_t n = grid.v.size();
    v.resize(static_cast<Eigen::Index>(n));
    theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t a = grid.theta.size(); a-- > 0;) {
        const auto& ax = grid.theta[a];
        theta(static_cast<Eigen::Index>(a + 1)) = ax.at(k % ax.count);
        k /= ax.count;
    }
    for (std::size_t a = n; a-- > 0;) {
        const auto& ax = grid.v[a];
        v(static_cast<Eigen::Index>(a)) = ax.at(k % ax.count);
        k /= ax.count;
    }
}

ScanPoint classify_point(const ReducedNetwork& red, const std::vector<InverterParams>& params, const StabilityConstraintSet& set,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta, double zero_tol) {
    ScanPoint pt;
    pt.v = v;
    pt.theta = theta;
    const OperatingPoint op{v, theta};
    const StateMatrix sm = linearize(red, params, op);
    const EigenReport er = eigen_stability(sm.A, zero_tol);
    pt.eig_stable = er.stable;
    pt.max_re = er.max_re;
    pt.trivial_mode_missing = er.trivial_mode_missing;
    const MarginReport mr = evaluate_margins(set, v);
    pt.dec_stable = mr.certified;
    pt.min_margin = mr.min_margin;
    return pt;
}

std::string scan_csv_header(std::size_t n) {
    std::ostringstream os;
    for (std::size_t i = 1; i <= n; ++i) os << 'V' << i << ',';
    for (std::size_t i = 2; i <= n; ++i) os << "theta" << i << ',';
    os << "eig_stable,dec_stable,max_re,min_margin";
    return os.str();
}

namespace {

std::string csv_row(const ScanPoint& pt) {
    std::string row;
    char buf[64];
    for (Eigen::Index i = 0; i < pt.v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g,", pt.v(i));
        row += buf;
    }
    for (Eigen::Index i = 1; i < pt.theta.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g,", pt.theta(i));
        row += buf;
    }
    std::snprintf(buf, sizeof buf, "%d,%d,%.12e,%.12e\n", pt.eig_stable ? 1 : 0, pt.dec_stable ? 1 : 0, pt.max_re, pt.min_margin);
    row += buf;
    return row;
}

void tally(GapRatioReport& rep, bool eig, bool dec) {
    ++rep.n_points;
    rep.n_eig_stable += eig;
    rep.n_dec_stable += dec;
    rep.n_both += eig && dec;
    rep.n_false_positive += dec && !eig;
}

// Reads complete rows of an earlier run; returns how many were recovered and
// truncates a trailing partial row.
std::size_t recover_csv(const std::filesystem::path& path, const std::string& header, std::size_t n_bus, GapRatioReport& rep) {
    std::ifstream in(path);
    if (!in) return 0;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::size_t last_nl = content.rfind('\n');
    if (last_nl == std::string::npos) {
        std::ofstream(path, std::ios::trunc) << header << '\n';
        return 0;
    }
    content.resize(last_nl + 1);
    std::istringstream ls(content);
    std::string line;
    std::getline(ls, line);
    if (line != header) throw std::runtime_error("cannot resume " + path.string() + ": header does not match this scan");
    const std::size_t eig_col = n_bus + (n_bus - 1);
    std::size_t rows = 0;
    while (std::getline(ls, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != eig_col + 4) throw std::runtime_error("cannot resume " + path.string() + ": malformed row");
        tally(rep, f[eig_col] == "1", f[eig_col + 1] == "1");
        ++rows;
    }
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return rows;
}

}  // namespace

GapRatioReport gap_ratio_scan(const ReducedNetwork& red, const std::vector<InverterParams>& params, const ScanGrid& grid,
                              const ScanOptions& options) {
    const std::size_t n = red.size();
    if (grid.v.size() != n || grid.theta.size() + 1 != n) throw std::invalid_argument("scan grid dimension does not match network");
    for (const auto& a : grid.theta) {
        if (std::max(std::abs(a.lo), std::abs(a.hi)) >= kPi / 2.0) {
            throw std::invalid_argument("angle axis leaves |theta| < pi/2");
        }
    }
    const StabilityConstraintSet set = build_constraints(red, params);
    const std::size_t total = grid.size();
    if (total == 0) throw std::invalid_argument("empty scan grid");

    GapRatioReport rep;
    std::size_t start = 0;
    std::ofstream csv;
    if (options.csv) {
        const std::string header = scan_csv_header(n);
        if (options.resume && std::filesystem::exists(*options.csv)) {
            start = recover_csv(*options.csv, header, n, rep);
            rep.n_resumed = start;
            csv.open(*options.csv, std::ios::app);
        } else {
            csv.open(*options.csv, std::ios::trunc);
            csv << header << '\n';
        }
        if (!csv) throw std::runtime_error("cannot write scan output " + options.csv->string());
    }

    std::size_t threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
    const std::size_t batch = std::max<std::size_t>(1, options.batch);
    std::vector<ScanPoint> results;
    std::vector<std::string> errors;

    for (std::size_t b0 = start; b0 < total; b0 += batch) {
        const std::size_t b1 = std::min(total, b0 + batch);
        results.assign(b1 - b0, ScanPoint{});
        errors.assign(b1 - b0, std::string{});
        auto work = [&](std::size_t tid) {
            Eigen::VectorXd v, th;
            for (std::size_t k = b0 + tid; k < b1; k += threads) {
                grid_point(grid, k, v, th);
                try {
                    results[k - b0] = classify_point(red, params, set, v, th, options.zero_tol);
                    results[k - b0].index = k;
                } catch (const std::exception& e) {
                    std::ostringstream msg;
                    msg << "grid point " << k << " (V = " << v.transpose() << ", theta = " << th.transpose() << "): " << e.what();
                    errors[k - b0] = msg.str();
                    return;
                }
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
            for (auto& t : pool) t.join();
        }
        for (std::size_t k = 0; k < results.size(); ++k) {
            auto& pt = results[k];
            if (!errors[k].empty()) {
                Eigen::VectorXd v, th;
                grid_point(grid, b0 + k, v, th);
                throw ScanError(errors[k], v, th);
            }
            tally(rep, pt.eig_stable, pt.dec_stable);
            rep.n_trivial_mode_missing += pt.trivial_mode_missing;
            if (csv.is_open()) csv << csv_row(pt);
            if (options.on_point) options.on_point(pt);
        }
        if (csv.is_open()) csv.flush();
    }
    if (rep.n_eig_stable > 0) {
        rep.xi = static_cast<double>(rep.n_eig_stable - rep.n_both) / static_cast<double>(rep.n_eig_stable);
    }
    return rep;
}

}  // namespace stabopf
