#include "stabopf/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "stabopf/solution_log.hpp"

namespace stabopf {

namespace {

double parse_number(std::string_view t) {
    while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
    while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(x))
        throw SpecError("not a number: '" + std::string(t) + "'");
    return x;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t p = s.find(sep, start);
        out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) return out;
        start = p + 1;
    }
}

std::string num(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string opt_num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

std::size_t thread_count(std::size_t requested, std::size_t jobs) {
    std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs f(k) for k in [0, n); results are stored by index, so the outcome
// does not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f) {
    const std::size_t t = thread_count(threads, n);
    if (t <= 1) {
        for (std::size_t k = 0; k < n; ++k) f(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < n;) {
                try {
                    f(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + p.string());
    return out;
}

bool is_two_bus(ExperimentId id) { return id == ExperimentId::table1 || id == ExperimentId::table2; }
bool is_39bus(ExperimentId id) {
    return id == ExperimentId::ieee39_mq || id == ExperimentId::ieee39_alpha || id == ExperimentId::ieee39_etaq;
}

// Network data and cost model for one (alpha, eta_q) setting.
struct Setting {
    SusceptanceMatrix B;
    ReducedNetwork red;
    CostModel cost;
    GenLimits limits;
};

Setting make_setting(const Network& net, double alpha, std::optional<double> etaq) {
    Setting s{build_susceptance(net, alpha), {}, CostModel::from_network(net), GenLimits::from_network(net)};
    s.red = kron_reduce(s.B, net);
    s.cost.eta_q = etaq;
    return s;
}

// Warm starts first, then the flat start and random starts; a failed point
// is retried from a wider random start set.
OpfSolution solve_point(const OpfProblem& p, const std::vector<DecisionVector>& warm, const ExperimentSpec& spec, bool& fallback) {
    std::vector<DecisionVector> starts = warm;
    for (auto& s : default_starts(p, spec.seed, spec.random_starts)) starts.push_back(std::move(s));
    OpfSolution sol = solve(p, starts, spec.solve);
    fallback = false;
    if (!sol.ok()) {
        fallback = true;
        OpfSolution retry = solve(p, default_starts(p, spec.seed + 1, std::max<std::size_t>(8, spec.random_starts)), spec.solve);
        if (retry.ok() || retry.kkt_residual < sol.kkt_residual) sol = std::move(retry);
    }
    return sol;
}

// Stability-free solve; every stability-feasible point is a valid start.
OpfSolution solve_baseline(const Network& net, const Setting& st, const ExperimentSpec& spec, const std::vector<DecisionVector>& warm = {}) {
    const OpfProblem p = assemble(net, st.B, st.cost, nullptr, st.limits);
    std::vector<DecisionVector> starts = warm;
    for (auto& s : default_starts(p, spec.seed, spec.random_starts)) starts.push_back(std::move(s));
    OpfSolution sol = solve(p, starts, spec.solve);
    if (!sol.ok()) {
        OpfSolution retry = solve(p, default_starts(p, spec.seed + 1, std::max<std::size_t>(8, spec.random_starts)), spec.solve);
        if (retry.ok() || retry.kkt_residual < sol.kkt_residual) sol = std::move(retry);
    }
    return sol;
}

SweepPoint make_point(const OpfProblem& p, const StabilityConstraintSet& set, OpfSolution sol, const ExperimentSpec& spec) {
    SweepPoint pt;
    Eigen::VectorXd v_red(static_cast<Eigen::Index>(set.red.size()));
    for (std::size_t r = 0; r < set.red.size(); ++r) v_red(static_cast<Eigen::Index>(r)) = sol.x.v(static_cast<Eigen::Index>(set.red.kept_index[r]));
    const MarginReport m = evaluate_margins(set, v_red);
    pt.min_margin = m.min_margin;
    pt.argmin = m.argmin;
    pt.nssp = compute_nssp(sol, set, spec.solve.binding_tol);
    pt.v_gen.resize(static_cast<Eigen::Index>(p.n_gen()));
    for (std::size_t k = 0; k < p.n_gen(); ++k) pt.v_gen(static_cast<Eigen::Index>(k)) = sol.x.v(static_cast<Eigen::Index>(p.gen_bus[k]));
    pt.v_spread = pt.v_gen.size() ? pt.v_gen.maxCoeff() - pt.v_gen.minCoeff() : 0.0;
    pt.failed = !sol.ok();
    pt.solution = std::move(sol);
    return pt;
}

void finish_baseline(std::vector<SweepPoint>& pts, const std::vector<double>& baselines) {
    // Every stability-feasible point is feasible without the stability
    // constraints, so a lower constrained objective improves the baseline.
    for (std::size_t k = 0; k < pts.size(); ++k) {
        double b = baselines[k];
        if (!pts[k].failed) b = std::min(b, pts[k].solution.objective);
        pts[k].baseline = b;
        pts[k].increase = pts[k].solution.objective - b;
    }
}

std::string pair_label(const StabilityConstraintSet& set, std::size_t l) {
    if (l >= set.size()) return "";
    const auto& c = set.constraints[l];
    return std::to_string(set.red.kept_ids[c.i]) + "-" + std::to_string(set.red.kept_ids[c.j]);
}

std::string sweep_record(const std::string& experiment, std::size_t point, const SweepPoint& pt, const OpfProblem& p) {
    SolutionRecord rec;
    rec.experiment = experiment;
    rec.point = point;
    rec.params = {{"mq", pt.mq}, {"alpha", pt.alpha}};
    if (pt.etaq) rec.params["etaq"] = *pt.etaq;
    rec.solution = pt.solution;
    return to_json_line(rec, p);
}

}  // namespace

std::string to_string(ExperimentId id) {
    switch (id) {
        case ExperimentId::gap_ratio: return "gap-ratio";
        case ExperimentId::table1: return "table1";
        case ExperimentId::table2: return "table2";
        case ExperimentId::ieee39_mq: return "ieee39-mq";
        case ExperimentId::ieee39_alpha: return "ieee39-alpha";
        case ExperimentId::ieee39_etaq: return "ieee39-etaq";
    }
    return "unknown";
}

std::optional<ExperimentId> parse_experiment_id(std::string_view name) {
    for (ExperimentId id : {ExperimentId::gap_ratio, ExperimentId::table1, ExperimentId::table2, ExperimentId::ieee39_mq,
                            ExperimentId::ieee39_alpha, ExperimentId::ieee39_etaq})
        if (to_string(id) == name) return id;
    return std::nullopt;
}

std::vector<double> parse_axis(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() == 1) return {parse_number(parts[0])};
    if (parts.size() != 3) throw SpecError("axis must be a:b:n, got '" + std::string(text) + "'");
    const double a = parse_number(parts[0]);
    const double b = parse_number(parts[1]);
    const double n = parse_number(parts[2]);
    if (n < 1.0 || n != std::floor(n)) throw SpecError("axis point count must be a positive integer, got '" + std::string(parts[2]) + "'");
    return ScanAxis{a, b, static_cast<std::size_t>(n)}.points();
}

std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    for (auto p : split(text, ',')) out.push_back(parse_number(p));
    return out;
}

void ExperimentSpec::validate() const {
    if (case_path.empty()) throw SpecError("a case file is required");
    switch (id) {
        case ExperimentId::gap_ratio:
            if (alpha.empty()) throw SpecError("gap-ratio needs at least one B value");
            if (mq.empty()) throw SpecError("gap-ratio needs a nonempty droop grid");
            break;
        case ExperimentId::table1:
        case ExperimentId::table2:
            if (gamma.empty()) throw SpecError("table recipe needs at least one Gamma_1 value");
            break;
        case ExperimentId::ieee39_mq:
        case ExperimentId::ieee39_alpha:
        case ExperimentId::ieee39_etaq:
            if (mq.empty()) throw SpecError("39-bus sweep needs a nonempty m_q grid");
            if (alpha.empty()) throw SpecError("39-bus sweep needs a nonempty alpha grid");
            if (id == ExperimentId::ieee39_etaq && etaq.empty()) throw SpecError("eta_q sweep needs a nonempty eta_q list");
            break;
    }
    for (double e : etaq)
        if (e < 0.0) throw SpecError("eta_q must be nonnegative");
    for (double a : alpha)
        if (a <= 0.0) throw SpecError("alpha and B must be positive");
    for (double m : mq)
        if (m <= 0.0) throw SpecError("droop gains must be positive");
}

ExperimentSpec preset(ExperimentId id) {
    ExperimentSpec s;
    s.id = id;
    switch (id) {
        case ExperimentId::gap_ratio:
            s.alpha = {2.0, 4.0, 6.0, 8.0};
            s.mq = parse_axis("1:5:9");
            s.slice_mq = parse_axis("0.03:7:36");
            break;
        case ExperimentId::table1:
            s.gamma = {0.005, 0.01, 0.015, 0.02, 0.025, 0.03};
            break;
        case ExperimentId::table2:
            s.gamma = {0.040, 0.042};
            break;
        case ExperimentId::ieee39_mq:
            s.mq = parse_axis("0.05:0.25:21");
            s.alpha = {1.0};
            s.random_starts = 0;
            break;
        case ExperimentId::ieee39_alpha:
            s.mq = {0.05, 0.1, 0.2};
            s.alpha = parse_axis("0.9:1.3:9");
            s.etaq = {0.0, 0.5};
            s.random_starts = 0;
            break;
        case ExperimentId::ieee39_etaq:
            s.mq = parse_axis("0.05:0.3:26");
            s.alpha = {1.0};
            s.etaq = {0.0, 0.5, 1.0, 2.0};
            s.random_starts = 0;
            break;
    }
    return s;
}

// ---- 2-bus tables ----

OpfProblem two_bus_table_problem(const Network& net, std::optional<double> gamma1) {
    if (net.n_bus() != 2) throw std::invalid_argument("table recipes need a 2-bus case");
    const SusceptanceMatrix B = build_susceptance(net);
    OpfOptions opt;
    opt.fixed_ref_voltage = 1.0;
    if (!gamma1) return assemble(net, B, CostModel::from_network(net), nullptr, GenLimits::from_network(net), opt);
    const StabilityConstraintSet set = build_constraints_with_gamma(kron_reduce(B, net), Eigen::Vector2d(*gamma1, *gamma1));
    return assemble(net, B, CostModel::from_network(net), &set, GenLimits::from_network(net), opt);
}

std::vector<TableRow> run_table(const Network& net, const std::vector<double>& gammas, bool unconstrained_row, bool flat_tie_break,
                                const ExperimentSpec& spec) {
    std::vector<std::optional<double>> rows(gammas.begin(), gammas.end());
    if (unconstrained_row) rows.push_back(std::nullopt);
    std::vector<TableRow> out;
    const auto other = static_cast<Eigen::Index>(1 - net.ref_index());
    for (const auto& g : rows) {
        const OpfProblem p = two_bus_table_problem(net, g);
        OpfSolution s = solve(p, default_starts(p, spec.seed, spec.random_starts), spec.solve);
        if (flat_tie_break && s.ok()) s = refine_flat_optimum(p, s, voltage_tilt(p), 1e-2, spec.solve);
        TableRow row;
        row.gamma1 = g;
        row.failed = !s.ok();
        row.theta2 = s.x.theta(other) - s.x.theta(static_cast<Eigen::Index>(net.ref_index()));
        row.v2 = s.x.v(other);
        if (g) {
            row.independently_binding = independently_binding(s, 0, spec.solve.binding_tol);
            row.lambda12 = s.mu_stab(0);
        }
        row.solution = std::move(s);
        out.push_back(std::move(row));
    }
    return out;
}

// ---- gap ratio ----

ScanGrid gap_ratio_grid(bool full) {
    ScanGrid g;
    const std::size_t nv = full ? 31 : 11;
    const std::size_t nt = full ? 61 : 11;
    g.v = {{0.95, 1.05, nv}, {0.95, 1.05, nv}};
    g.theta = {{-0.525, 0.525, nt}};
    return g;
}

ScanGrid slice_grid(bool full) {
    ScanGrid g;
    const std::size_t n = full ? 61 : 11;
    g.v = {{0.85, 1.15, n}, {0.85, 1.15, n}};
    g.theta = {{-0.525, 0.525, n}};
    return g;
}

GapRatioCell gap_ratio_cell(const Network& unit, double B, double m1, double m2, const ScanGrid& grid, const ScanOptions& options) {
    if (unit.n_bus() != 2) throw std::invalid_argument("gap-ratio scans need a 2-bus case");
    const ReducedNetwork red = kron_reduce(build_susceptance(unit, B), unit);
    std::vector<InverterParams> prm = uniform_params(2, m1);
    prm[1].m_q = m2;
    ScanOptions o = options;
    double worst = -std::numeric_limits<double>::infinity();
    o.on_point = [&](const ScanPoint& pt) {
        worst = std::max(worst, pt.max_re);
        if (options.on_point) options.on_point(pt);
    };
    GapRatioCell cell{B, m1, m2, gap_ratio_scan(red, prm, grid, o), 0.0, 0.0};
    cell.max_re_worst = worst;
    const StabilityConstraintSet set = build_constraints(red, prm);
    cell.max_re_nominal = classify_point(red, prm, set, Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d::Zero(), options.zero_tol).max_re;
    return cell;
}

// ---- 39-bus sweeps ----

SweepGroup run_mq_sweep(const Network& net, double alpha, std::optional<double> etaq, const std::vector<double>& mq,
                        const ExperimentSpec& spec, bool locate_critical) {
    if (locate_critical && !std::is_sorted(mq.begin(), mq.end())) throw SpecError("m_q axis must be increasing");
    const Setting st = make_setting(net, alpha, etaq);
    const OpfSolution base = solve_baseline(net, st, spec);
    SweepGroup grp;
    grp.alpha = alpha;
    grp.etaq = etaq;
    std::optional<DecisionVector> warm;
    auto solve_at = [&](double m, const std::optional<DecisionVector>& w) {
        std::vector<DecisionVector> ws;
        if (w) ws.push_back(*w);
        if (base.ok()) ws.push_back(base.x);
        const StabilityConstraintSet set = build_constraints(st.red, uniform_params(st.red.size(), m));
        const OpfProblem p = assemble(net, st.B, st.cost, &set, st.limits);
        bool fb = false;
        OpfSolution sol = solve_point(p, ws, spec, fb);
        SweepPoint pt = make_point(p, set, std::move(sol), spec);
        pt.mq = m;
        pt.alpha = alpha;
        pt.etaq = etaq;
        pt.used_fallback = fb;
        return std::make_pair(std::move(pt), p);
    };
    double best_base = base.ok() ? base.objective : std::numeric_limits<double>::infinity();
    for (double m : mq) {
        auto [pt, p] = solve_at(m, spec.warm_start ? warm : std::nullopt);
        if (!pt.failed) warm = pt.solution.x;
        grp.points.push_back(std::move(pt));
    }
    for (const auto& pt : grp.points)
        if (!pt.failed) best_base = std::min(best_base, pt.solution.objective);
    finish_baseline(grp.points, std::vector<double>(grp.points.size(), best_base));

    if (locate_critical) {
        std::size_t k = 0;
        while (k < grp.points.size() && (grp.points[k].failed || grp.points[k].increase <= kIncreaseTol)) ++k;
        if (k < grp.points.size()) {
            double lo = k == 0 ? grp.points[0].mq : grp.points[k - 1].mq;
            double hi = grp.points[k].mq;
            std::optional<DecisionVector> wlo;
            if (k > 0 && !grp.points[k - 1].failed) wlo = grp.points[k - 1].solution.x;
            while (hi - lo > 1e-4) {
                const double mid = 0.5 * (lo + hi);
                auto [pt, p] = solve_at(mid, wlo);
                if (!pt.failed && pt.solution.objective - best_base > kIncreaseTol) {
                    hi = mid;
                } else {
                    lo = mid;
                    if (!pt.failed) wlo = pt.solution.x;
                }
            }
            grp.critical_lo = lo;
            grp.critical_hi = hi;
            grp.critical_mq = 0.5 * (lo + hi);
        }
    }
    return grp;
}

SweepGroup run_alpha_sweep(const Network& net, double mq, std::optional<double> etaq, const std::vector<double>& alpha,
                           const ExperimentSpec& spec) {
    SweepGroup grp;
    grp.alpha = alpha.empty() ? 1.0 : alpha.front();
    grp.etaq = etaq;
    grp.fixed_mq = mq;
    std::vector<double> baselines;
    std::optional<DecisionVector> warm, warm_base;
    for (double a : alpha) {
        const Setting st = make_setting(net, a, etaq);
        std::vector<DecisionVector> bstarts;
        if (spec.warm_start && warm) bstarts.push_back(*warm);
        if (spec.warm_start && warm_base) bstarts.push_back(*warm_base);
        OpfSolution base = solve_baseline(net, st, spec, bstarts);
        const StabilityConstraintSet set = build_constraints(st.red, uniform_params(st.red.size(), mq));
        const OpfProblem p = assemble(net, st.B, st.cost, &set, st.limits);
        std::vector<DecisionVector> ws;
        if (spec.warm_start && warm) ws.push_back(*warm);
        if (base.ok()) ws.push_back(base.x);
        bool fb = false;
        OpfSolution sol = solve_point(p, ws, spec, fb);
        if (sol.ok() && (!base.ok() || sol.objective < base.objective - kIncreaseTol)) {
            // The baseline missed a better point; restart it from there.
            OpfSolution again = solve_baseline(net, st, spec, {sol.x});
            if (again.ok() && (!base.ok() || again.objective < base.objective)) base = std::move(again);
        }
        SweepPoint pt = make_point(p, set, std::move(sol), spec);
        pt.mq = mq;
        pt.alpha = a;
        pt.etaq = etaq;
        pt.used_fallback = fb;
        if (!pt.failed) warm = pt.solution.x;
        if (base.ok()) warm_base = base.x;
        baselines.push_back(base.ok() ? base.objective : std::numeric_limits<double>::infinity());
        grp.points.push_back(std::move(pt));
    }
    finish_baseline(grp.points, baselines);
    return grp;
}

// ---- runner ----

namespace {

ExperimentResult run_tables(const ExperimentSpec& spec, const std::filesystem::path& dir) {
    const Network net = load_case(spec.case_path);
    const bool t1 = spec.id == ExperimentId::table1;
    const auto rows = run_table(net, spec.gamma, !t1, t1, spec);
    ExperimentResult res;
    const auto summary = dir / "summary.csv";
    const auto logp = dir / "log.jsonl";
    std::ofstream out = open_out(summary);
    SolutionLog log(logp);
    out << "gamma1,objective,theta2,v2,independently_binding,lambda12,status\n";
    std::size_t k = 0;
    for (const auto& r : rows) {
        out << opt_num(r.gamma1) << ',' << num(r.solution.objective) << ',' << num(r.theta2) << ',' << num(r.v2) << ','
            << (r.gamma1 ? (r.independently_binding ? "yes" : "no") : "no") << ',' << (r.gamma1 ? num(r.lambda12) : "") << ','
            << (r.failed ? "failed:" : "") << to_string(r.solution.status) << '\n';
        SolutionRecord rec;
        rec.experiment = to_string(spec.id);
        rec.point = k++;
        if (r.gamma1) rec.params["gamma1"] = *r.gamma1;
        rec.solution = r.solution;
        log.append(rec, two_bus_table_problem(net, r.gamma1));
        ++res.n_points;
        res.n_failed += r.failed;
    }
    res.outputs = {summary, logp};
    return res;
}

ExperimentResult run_gap(const ExperimentSpec& spec, const std::filesystem::path& dir) {
    const Network unit = load_case(spec.case_path);
    ExperimentResult res;
    ScanOptions so;
    so.threads = spec.threads;
    const auto summary = dir / "summary.csv";
    const auto slice = dir / "slice.csv";
    const auto logp = dir / "log.jsonl";
    std::ofstream out = open_out(summary);
    std::ofstream sl = open_out(slice);
    SolutionLog log(logp);
    const std::string cols = "n_points,n_eig_stable,n_dec_stable,n_both,n_false_positive,xi,max_re_nominal,max_re_worst,status";
    out << "B,m1,m2," << cols << '\n';
    sl << "B,mq," << cols << '\n';
    auto emit = [&](std::ofstream& o, const char* kind, double B, double m1, double m2, bool two) {
        const ScanGrid grid = std::string(kind) == "slice" ? slice_grid(spec.full) : gap_ratio_grid(spec.full);
        nlohmann::json j{{"experiment", to_string(spec.id)}, {"kind", kind}, {"B", B}, {"m1", m1}, {"m2", m2}};
        o << num(B) << ',' << num(m1) << ',';
        if (two) o << num(m2) << ',';
        ++res.n_points;
        try {
            const GapRatioCell c = gap_ratio_cell(unit, B, m1, m2, grid, so);
            const GapRatioReport& r = c.report;
            o << r.n_points << ',' << r.n_eig_stable << ',' << r.n_dec_stable << ',' << r.n_both << ',' << r.n_false_positive << ','
              << opt_num(r.xi) << ',' << num(c.max_re_nominal) << ',' << num(c.max_re_worst) << ",ok\n";
            j["n_points"] = r.n_points;
            j["n_eig_stable"] = r.n_eig_stable;
            j["n_dec_stable"] = r.n_dec_stable;
            j["n_both"] = r.n_both;
            j["n_false_positive"] = r.n_false_positive;
            j["n_trivial_mode_missing"] = r.n_trivial_mode_missing;
            j["xi"] = r.xi ? nlohmann::json(*r.xi) : nlohmann::json(nullptr);
            j["max_re_nominal"] = c.max_re_nominal;
            j["max_re_worst"] = c.max_re_worst;
        } catch (const std::exception& e) {
            o << ",,,,,,,,failed\n";
            j["error"] = e.what();
            ++res.n_failed;
        }
        log.append_raw(j.dump());
    };
    for (double B : spec.alpha)
        for (double m1 : spec.mq)
            for (double m2 : spec.mq) emit(out, "cell", B, m1, m2, true);
    for (double B : spec.alpha)
        for (double m : spec.slice_mq) emit(sl, "slice", B, m, m, false);
    res.outputs = {summary, slice, logp};
    return res;
}

ExperimentResult run_39(const ExperimentSpec& spec, const std::filesystem::path& dir) {
    const Network net = load_case(spec.case_path);
    std::vector<std::optional<double>> etas;
    if (spec.etaq.empty()) etas.push_back(std::nullopt);
    for (double e : spec.etaq) etas.push_back(e);

    struct Job {
        double outer;  // alpha for m_q sweeps, m_q for alpha sweeps
        std::optional<double> etaq;
    };
    const bool alpha_sweep = spec.id == ExperimentId::ieee39_alpha;
    std::vector<Job> jobs;
    for (const auto& e : etas)
        for (double o : alpha_sweep ? spec.mq : spec.alpha) jobs.push_back({o, e});

    std::vector<SweepGroup> groups(jobs.size());
    std::vector<std::vector<std::string>> records(jobs.size());
    ExperimentSpec inner = spec;
    inner.threads = 1;
    parallel_for(jobs.size(), spec.threads, [&](std::size_t k) {
        const Job& j = jobs[k];
        groups[k] = alpha_sweep ? run_alpha_sweep(net, j.outer, j.etaq, spec.alpha, inner) : run_mq_sweep(net, j.outer, j.etaq, spec.mq, inner, true);
        for (const auto& pt : groups[k].points) {
            const Setting st = make_setting(net, pt.alpha, pt.etaq);
            const StabilityConstraintSet set = build_constraints(st.red, uniform_params(st.red.size(), pt.mq));
            const OpfProblem p = assemble(net, st.B, st.cost, &set, st.limits);
            records[k].push_back(sweep_record(to_string(spec.id), 0, pt, p));
        }
    });

    ExperimentResult res;
    const auto summary = dir / "summary.csv";
    const auto logp = dir / "log.jsonl";
    std::ofstream out = open_out(summary);
    SolutionLog log(logp);
    const Setting st0 = make_setting(net, 1.0, std::nullopt);
    const StabilityConstraintSet set0 = build_constraints(st0.red, uniform_params(st0.red.size(), 1.0));
    const OpfProblem p0 = assemble(net, st0.B, st0.cost, &set0, st0.limits);
    out << "mq,alpha,etaq,status,objective,baseline,increase,min_margin,argmin_pair,nssp_total,v_spread";
    for (int id : set0.red.kept_ids) out << ",nssp_" << id;
    for (std::size_t b : p0.gen_bus) out << ",v_" << net.buses[b].id;
    out << ",fallback\n";
    std::size_t point = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        for (std::size_t q = 0; q < groups[k].points.size(); ++q) {
            const SweepPoint& pt = groups[k].points[q];
            out << num(pt.mq) << ',' << num(pt.alpha) << ',' << opt_num(pt.etaq) << ',' << (pt.failed ? "failed:" : "")
                << to_string(pt.solution.status) << ',' << num(pt.solution.objective) << ',' << num(pt.baseline) << ','
                << num(pt.increase) << ',' << num(pt.min_margin) << ',' << pair_label(set0, pt.argmin) << ',' << num(pt.nssp.nssp.sum())
                << ',' << num(pt.v_spread);
            for (Eigen::Index r = 0; r < pt.nssp.nssp.size(); ++r) out << ',' << num(pt.nssp.nssp(r));
            for (Eigen::Index g = 0; g < pt.v_gen.size(); ++g) out << ',' << num(pt.v_gen(g));
            out << ',' << (pt.used_fallback ? "yes" : "no") << '\n';
            // Point numbers are assigned in output order.
            auto rec = nlohmann::json::parse(records[k][q]);
            rec["point"] = point++;
            log.append_raw(rec.dump());
            ++res.n_points;
            res.n_failed += pt.failed;
        }
    }
    res.outputs = {summary, logp};
    if (!alpha_sweep) {
        const auto crit = dir / "critical.csv";
        std::ofstream c = open_out(crit);
        c << "alpha,etaq,critical_mq,bracket_lo,bracket_hi\n";
        for (const auto& g : groups) {
            c << num(g.alpha) << ',' << opt_num(g.etaq) << ',' << opt_num(g.critical_mq) << ',';
            if (g.critical_mq) c << num(g.critical_lo) << ',' << num(g.critical_hi);
            else c << ',';
            c << '\n';
        }
        res.outputs.push_back(crit);
    }
    return res;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto dir = spec.out_dir / to_string(spec.id);
    std::filesystem::create_directories(dir);
    if (spec.id == ExperimentId::gap_ratio) return run_gap(spec, dir);
    if (is_two_bus(spec.id)) return run_tables(spec, dir);
    if (is_39bus(spec.id)) return run_39(spec, dir);
    throw SpecError("unknown experiment");
}

}  // namespace stabopf
