#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stabopf/econdual.hpp"
#include "stabopf/opfcore.hpp"
#include "stabopf/stabcert.hpp"

namespace stabopf {

enum class ExperimentId { gap_ratio, table1, table2, ieee39_mq, ieee39_alpha, ieee39_etaq };
std::string to_string(ExperimentId id);
std::optional<ExperimentId> parse_experiment_id(std::string_view name);

class SpecError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// "a:b:n" gives n evenly spaced points from a to b; a bare number is a
// one-point axis. Throws SpecError.
std::vector<double> parse_axis(std::string_view text);
// Comma-separated values. Throws SpecError.
std::vector<double> parse_list(std::string_view text);

struct ExperimentSpec {
    ExperimentId id = ExperimentId::table1;
    std::filesystem::path case_path;
    std::filesystem::path out_dir = "out";
    // Gap ratio: droop grid shared by m1 and m2, B values in `alpha`.
    // 39-bus: m_q axis, susceptance scaling, reactive cost ratios
    // (empty etaq means the case's own costs).
    std::vector<double> mq;
    std::vector<double> alpha;
    std::vector<double> etaq;
    std::vector<double> gamma;  // Gamma_1 rows of the 2-bus tables
    std::vector<double> slice_mq;  // symmetric gap-ratio slice
    bool full = false;
    std::uint64_t seed = 1;
    std::size_t random_starts = 8;
    bool warm_start = true;
    std::size_t threads = 0;  // 0 = hardware concurrency
    SolveOptions solve;

    // Throws SpecError when a grid the experiment needs is empty.
    void validate() const;
};

// Preset with every parameter block of the named study.
ExperimentSpec preset(ExperimentId id);

// ---- 2-bus tables ----

// V1 fixed at 1; stab1 bound Gamma_1, stab2 bound Gamma_2 = Gamma_1.
OpfProblem two_bus_table_problem(const Network& net, std::optional<double> gamma1);

struct TableRow {
    std::optional<double> gamma1;  // empty for the unconstrained row
    OpfSolution solution;
    double theta2 = 0.0;
    double v2 = 0.0;
    bool independently_binding = false;
    double lambda12 = 0.0;
    bool failed = false;
};

std::vector<TableRow> run_table(const Network& net, const std::vector<double>& gammas, bool unconstrained_row, bool flat_tie_break,
                                const ExperimentSpec& spec);

// ---- gap ratio ----

ScanGrid gap_ratio_grid(bool full);
ScanGrid slice_grid(bool full);

struct GapRatioCell {
    double B = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    GapRatioReport report;
    double max_re_nominal = 0.0;  // at V = 1, theta = 0
    double max_re_worst = 0.0;    // largest max Re(lambda) over the grid
};

// `unit` is the unit-coupling 2-bus case, scaled by B.
GapRatioCell gap_ratio_cell(const Network& unit, double B, double m1, double m2, const ScanGrid& grid, const ScanOptions& options = {});

// ---- 39-bus sweeps ----

struct SweepPoint {
    double mq = 0.0;
    double alpha = 1.0;
    std::optional<double> etaq;
    OpfSolution solution;
    double baseline = 0.0;  // best stability-free objective known for (alpha, etaq)
    double increase = 0.0;
    double min_margin = 0.0;
    std::size_t argmin = 0;
    NsspReport nssp;
    double v_spread = 0.0;     // max - min generator voltage
    Eigen::VectorXd v_gen;     // generator voltages, inverter order
    bool failed = false;
    bool used_fallback = false;
};

struct SweepGroup {
    double alpha = 1.0;
    std::optional<double> etaq;
    std::optional<double> fixed_mq;  // set for alpha sweeps
    std::vector<SweepPoint> points;
    // Smallest m_q with objective increase above kIncreaseTol (bisection
    // between grid points); empty when no grid point exceeds it.
    std::optional<double> critical_mq;
    double critical_lo = 0.0;
    double critical_hi = 0.0;
};

constexpr double kIncreaseTol = 1e-6;

SweepGroup run_mq_sweep(const Network& net, double alpha, std::optional<double> etaq, const std::vector<double>& mq,
                        const ExperimentSpec& spec, bool locate_critical);
SweepGroup run_alpha_sweep(const Network& net, double mq, std::optional<double> etaq, const std::vector<double>& alpha,
                           const ExperimentSpec& spec);

// ---- runner ----

struct ExperimentResult {
    std::size_t n_points = 0;
    std::size_t n_failed = 0;
    std::vector<std::filesystem::path> outputs;
};

// Writes summary.csv, log.jsonl and recipe-specific CSVs under
// out_dir/<experiment id>. Output bytes depend only on the spec.
ExperimentResult run_experiment(const ExperimentSpec& spec);

}  // namespace stabopf
