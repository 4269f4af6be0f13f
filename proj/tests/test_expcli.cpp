#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "stabopf/econdual.hpp"
#include "stabopf/experiments.hpp"
#include "stabopf/solution_log.hpp"

using namespace stabopf;
using namespace fixture;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Rows of a csv keyed by column name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const auto head = split_line(line);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        const auto cells = split_line(line);
        REQUIRE(cells.size() == head.size());
        std::map<std::string, std::string> row;
        for (std::size_t k = 0; k < head.size(); ++k) row[head[k]] = cells[k];
        rows.push_back(std::move(row));
    }
    return rows;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("stabopf_test_expcli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string case_path(const char* name) { return std::string(STABOPF_CASE_DIR) + "/" + name; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + STABOPF_CLI + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ExperimentSpec small_39_spec(ExperimentId id, const fs::path& out) {
    ExperimentSpec s = preset(id);
    s.case_path = case_path("ieee39_lossless.case");
    s.out_dir = out;
    return s;
}

}  // namespace

TEST_CASE("axis and list parsing") {
    CHECK(parse_axis("0.5") == std::vector<double>{0.5});
    const auto a = parse_axis("1:5:9");
    REQUIRE(a.size() == 9);
    CHECK(a.front() == 1.0);
    CHECK(a.back() == 5.0);
    CHECK(a[4] == doctest::Approx(3.0));
    CHECK(parse_list("0, 0.5,2") == std::vector<double>{0.0, 0.5, 2.0});
    CHECK_THROWS_AS(parse_axis("1:2"), SpecError);
    CHECK_THROWS_AS(parse_axis("1:2:0"), SpecError);
    CHECK_THROWS_AS(parse_axis("1:2:2.5"), SpecError);
    CHECK_THROWS_AS(parse_axis("a:2:3"), SpecError);
    CHECK_THROWS_AS(parse_list("1,,2"), SpecError);
    CHECK_THROWS_AS(parse_list("nan"), SpecError);
}

TEST_CASE("experiment ids round-trip") {
    for (ExperimentId id : {ExperimentId::gap_ratio, ExperimentId::table1, ExperimentId::table2, ExperimentId::ieee39_mq,
                            ExperimentId::ieee39_alpha, ExperimentId::ieee39_etaq})
        CHECK(parse_experiment_id(to_string(id)) == id);
    CHECK_FALSE(parse_experiment_id("table3").has_value());
}

TEST_CASE("spec validation") {
    ExperimentSpec s = preset(ExperimentId::ieee39_etaq);
    CHECK_THROWS_AS(s.validate(), SpecError);  // no case
    s.case_path = "x.case";
    CHECK_NOTHROW(s.validate());
    s.etaq.clear();
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = preset(ExperimentId::ieee39_mq);
    s.case_path = "x.case";
    s.etaq = {-1.0};
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = preset(ExperimentId::gap_ratio);
    s.case_path = "x.case";
    s.alpha = {0.0};
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = preset(ExperimentId::table1);
    s.case_path = "x.case";
    s.gamma.clear();
    CHECK_THROWS_AS(s.validate(), SpecError);
}

TEST_CASE("zero-price table recipe") {
    const Network net = case_file("two_bus_zero_price.case");
    ExperimentSpec spec = preset(ExperimentId::table1);
    const auto rows = run_table(net, spec.gamma, false, true, spec);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CHECK_FALSE(r.failed);
        CHECK(std::abs(r.solution.objective - 0.7456) <= 5e-4);
        CHECK(std::abs(r.lambda12) <= 1e-6);
        CHECK(std::abs(r.v2 - (1.0 + *r.gamma1)) <= 1e-4);
        CHECK(std::abs(r.solution.h_values(0)) <= 1e-6);
    }
}

TEST_CASE("a loose bound reproduces the unconstrained row") {
    const Network net = case_file("two_bus_reactive_cost.case");
    ExperimentSpec spec = preset(ExperimentId::table2);
    const auto rows = run_table(net, {10.0}, true, false, spec);
    REQUIRE(rows.size() == 2);
    const auto& loose = rows[0].gamma1 ? rows[0] : rows[1];
    const auto& free = rows[0].gamma1 ? rows[1] : rows[0];
    CHECK_FALSE(free.gamma1.has_value());
    CHECK(loose.solution.objective == doctest::Approx(free.solution.objective).epsilon(1e-8));
    CHECK(std::abs(loose.lambda12) <= 1e-8);
    CHECK(std::abs(free.solution.objective - 1.3792) <= 0.02 * 1.3792);
}

TEST_CASE("tightening the bound never lowers the table objective") {
    const Network net = case_file("two_bus_reactive_cost.case");
    ExperimentSpec spec = preset(ExperimentId::table2);
    const auto rows = run_table(net, {0.036, 0.038, 0.040, 0.042}, true, false, spec);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (!r.gamma1) continue;
        CHECK_FALSE(r.failed);
        CHECK(r.solution.objective <= prev + 1e-9);
        prev = r.solution.objective;
    }
}

TEST_CASE("gap-ratio csv matches a direct scan") {
    const fs::path out = scratch_dir("gap");
    ExperimentSpec spec = preset(ExperimentId::gap_ratio);
    spec.case_path = case_path("two_bus_unit.case");
    spec.out_dir = out;
    spec.alpha = {4.0};
    spec.mq = {2.0};
    spec.slice_mq = {2.0};
    const ExperimentResult r = run_experiment(spec);
    CHECK(r.n_failed == 0);
    CHECK(r.n_points == 2);
    const auto rows = read_csv(out / "gap-ratio" / "summary.csv");
    REQUIRE(rows.size() == 1);

    const Network unit = load_case(spec.case_path);
    const ReducedNetwork red = kron_reduce(build_susceptance(unit, 4.0), unit);
    const std::vector<InverterParams> prm = uniform_params(2, 2.0);
    const GapRatioReport direct = gap_ratio_scan(red, prm, gap_ratio_grid(false));
    CHECK(std::stoul(rows[0].at("n_points")) == direct.n_points);
    CHECK(std::stoul(rows[0].at("n_eig_stable")) == direct.n_eig_stable);
    CHECK(std::stoul(rows[0].at("n_dec_stable")) == direct.n_dec_stable);
    CHECK(std::stoul(rows[0].at("n_false_positive")) == direct.n_false_positive);
    REQUIRE(direct.xi.has_value());
    CHECK(std::stod(rows[0].at("xi")) == doctest::Approx(*direct.xi).epsilon(1e-10));
    const auto slice = read_csv(out / "gap-ratio" / "slice.csv");
    REQUIRE(slice.size() == 1);
    CHECK(std::stoul(slice[0].at("n_points")) == slice_grid(false).size());
}

TEST_CASE("certified sets are nested along B") {
    const Network unit = case_file("two_bus_unit.case");
    const ScanGrid grid = gap_ratio_grid(false);
    std::vector<bool> loose, tight;
    ScanOptions a, b;
    a.on_point = [&](const ScanPoint& p) { loose.push_back(p.dec_stable); };
    b.on_point = [&](const ScanPoint& p) { tight.push_back(p.dec_stable); };
    const GapRatioCell c2 = gap_ratio_cell(unit, 2.0, 1.0, 1.0, grid, a);
    const GapRatioCell c8 = gap_ratio_cell(unit, 8.0, 1.0, 1.0, grid, b);
    REQUIRE(loose.size() == tight.size());
    for (std::size_t k = 0; k < loose.size(); ++k)
        if (tight[k]) CHECK(loose[k]);
    CHECK(c8.report.n_dec_stable <= c2.report.n_dec_stable);
}

TEST_CASE("same spec gives byte-identical outputs for any thread count") {
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    ExperimentSpec s = small_39_spec(ExperimentId::ieee39_etaq, a);
    s.mq = {0.1, 0.2};
    s.etaq = {0.0, 1.0};
    s.threads = 1;
    run_experiment(s);
    s.out_dir = b;
    s.threads = 3;
    run_experiment(s);
    for (const char* f : {"summary.csv", "log.jsonl", "critical.csv"})
        CHECK_MESSAGE(slurp(a / "ieee39-etaq" / f) == slurp(b / "ieee39-etaq" / f), f);
}

TEST_CASE("zero reactive cost ratio equals the active-only model") {
    const Network net = load_case(case_path("ieee39_lossless.case"));
    const ExperimentSpec spec = small_39_spec(ExperimentId::ieee39_mq, "unused");
    const SweepGroup p_only = run_mq_sweep(net, 1.0, std::nullopt, {0.2}, spec, false);
    const SweepGroup eta0 = run_mq_sweep(net, 1.0, 0.0, {0.2}, spec, false);
    REQUIRE(p_only.points.size() == 1);
    REQUIRE(eta0.points.size() == 1);
    CHECK(eta0.points[0].solution.objective == doctest::Approx(p_only.points[0].solution.objective).epsilon(1e-9));
    CHECK(eta0.points[0].increase == doctest::Approx(p_only.points[0].increase).epsilon(1e-6));
}

TEST_CASE("sweep increases are nonnegative and ordered") {
    const Network net = load_case(case_path("ieee39_lossless.case"));
    const ExperimentSpec spec = small_39_spec(ExperimentId::ieee39_mq, "unused");
    const SweepGroup g = run_mq_sweep(net, 1.0, std::nullopt, {0.1, 0.2, 0.25}, spec, false);
    double prev = -1.0;
    for (const auto& p : g.points) {
        CHECK_FALSE(p.failed);
        CHECK(p.increase >= 0.0);
        CHECK(p.increase >= prev - 1e-9);
        prev = p.increase;
    }
    CHECK_THROWS_AS(run_mq_sweep(net, 1.0, std::nullopt, {0.2, 0.1}, spec, true), SpecError);
}

TEST_CASE("logged solutions reproduce the NSSP columns") {
    const fs::path out = scratch_dir("nssp");
    ExperimentSpec s = small_39_spec(ExperimentId::ieee39_mq, out);
    s.mq = {0.1, 0.22};
    const ExperimentResult r = run_experiment(s);
    CHECK(r.n_failed == 0);
    const Network net = load_case(s.case_path);
    const ReducedNetwork red = kron_reduce(build_susceptance(net), net);
    const auto rows = read_csv(out / "ieee39-mq" / "summary.csv");
    std::ifstream log(out / "ieee39-mq" / "log.jsonl");
    std::string line;
    std::size_t k = 0;
    while (std::getline(log, line)) {
        REQUIRE(k < rows.size());
        const SolutionRecord rec = parse_json_line(line);
        CHECK(rec.point == k);
        const double mq = rec.params.at("mq");
        CHECK(mq == doctest::Approx(std::stod(rows[k].at("mq"))));
        const StabilityConstraintSet set = build_constraints(red, uniform_params(red.size(), mq));
        const NsspReport nssp = compute_nssp(rec.solution, set);
        for (std::size_t b = 0; b < nssp.bus_id.size(); ++b) {
            const double logged = std::stod(rows[k].at("nssp_" + std::to_string(nssp.bus_id[b])));
            CHECK(nssp.nssp(static_cast<Eigen::Index>(b)) == doctest::Approx(logged).epsilon(1e-9).scale(1e-9));
        }
        ++k;
    }
    CHECK(k == rows.size());
    CHECK(std::stod(rows.back().at("nssp_32")) > 0.0);
    CHECK_THROWS_AS(parse_json_line("{\"experiment\": 3"), std::invalid_argument);
}

TEST_CASE("cli exit codes") {
    const fs::path out = scratch_dir("cli");
    const std::string o = " --out \"" + out.string() + "\"";
    CHECK(run_cli("nonsense") == 1);
    CHECK(run_cli("table1") == 1);
    CHECK(run_cli("table1 --case \"" + (out / "missing.case").string() + "\"" + o) == 1);
    CHECK(run_cli("ieee39-mq --mq 1:2 --case \"" + case_path("ieee39_lossless.case") + "\"" + o) == 1);
    CHECK(run_cli("table1 --case \"" + case_path("two_bus_zero_price.case") + "\"" + o) == 0);
    CHECK(fs::exists(out / "table1" / "summary.csv"));
    CHECK(run_cli("table1 --gamma -0.5 --case \"" + case_path("two_bus_zero_price.case") + "\"" + o) == 2);
}
