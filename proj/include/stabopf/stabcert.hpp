#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabopf/dynamics.hpp"
#include "stabopf/netmodel.hpp"

namespace stabopf {

// V_j - V_i <= gamma, i.e. alpha^T V <= gamma with alpha = e_j - e_i.
// Indices refer to the reduced network.
struct StabilityConstraint {
    std::size_t i = 0;
    std::size_t j = 0;
    double gamma = 0.0;

    Eigen::VectorXd alpha(std::size_t n) const;
};

struct StabilityConstraintSet {
    std::vector<StabilityConstraint> constraints;
    ReducedNetwork red;
    Eigen::VectorXd gamma_bus;  // Gamma_i per reduced bus

    std::size_t size() const noexcept { return constraints.size(); }
};

// Gamma_i = 1 / (2 m_q beta_q |B_red_ii|), one constraint per ordered
// neighbor pair. Throws std::invalid_argument if some B_red_ii = 0.
StabilityConstraintSet build_constraints(const ReducedNetwork& red, const std::vector<InverterParams>& params);
// Same pair structure with explicit per-bus bounds.
StabilityConstraintSet build_constraints_with_gamma(const ReducedNetwork& red, const Eigen::VectorXd& gamma_bus);

struct MarginReport {
    Eigen::VectorXd slack;  // gamma_l - alpha_l^T V
    double min_margin = 0.0;  // +inf when there are no constraints
    std::size_t argmin = 0;
    bool certified = false;  // min_margin >= 0
};

MarginReport evaluate_margins(const StabilityConstraintSet& set, const Eigen::VectorXd& v);

// psi_i = max_{j in N_i} (V_j - V_i) - Gamma_i; -inf for isolated buses.
Eigen::VectorXd max_form_values(const StabilityConstraintSet& set, const Eigen::VectorXd& v);

struct ScanAxis {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 1;

    // count evenly spaced points; count == 1 gives {lo}.
    std::vector<double> points() const;
    double at(std::size_t k) const;
};

// Voltage axes for every reduced bus; angle axes for buses 1..n-1 (bus 0
// is the angle reference).
struct ScanGrid {
    std::vector<ScanAxis> v;
    std::vector<ScanAxis> theta;

    std::size_t size() const;
};

struct ScanPoint {
    std::size_t index = 0;
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
    bool eig_stable = false;
    bool dec_stable = false;
    double max_re = 0.0;
    double min_margin = 0.0;
    bool trivial_mode_missing = false;
};

struct ScanOptions {
    double zero_tol = 1e-7;
    std::size_t threads = 0;  // 0 = hardware concurrency
    std::size_t batch = 4096;
    std::optional<std::filesystem::path> csv;  // rows streamed in grid order
    bool resume = false;  // continue an existing csv instead of truncating
    std::function<void(const ScanPoint&)> on_point;  // called in grid order
};

struct GapRatioReport {
    std::optional<double> xi;  // empty when no point is eigen-stable
    std::size_t n_points = 0;
    std::size_t n_eig_stable = 0;
    std::size_t n_dec_stable = 0;
    std::size_t n_both = 0;
    std::size_t n_false_positive = 0;
    std::size_t n_trivial_mode_missing = 0;
    std::size_t n_resumed = 0;
};

class ScanError : public std::runtime_error {
  public:
    ScanError(const std::string& what, Eigen::VectorXd v, Eigen::VectorXd theta)
        : std::runtime_error(what), v_(std::move(v)), theta_(std::move(theta)) {}
    const Eigen::VectorXd& v() const noexcept { return v_; }
    const Eigen::VectorXd& theta() const noexcept { return theta_; }

  private:
    Eigen::VectorXd v_;
    Eigen::VectorXd theta_;
};

// Grid point number k in row-major order (last angle axis fastest).
void grid_point(const ScanGrid& grid, std::size_t k, Eigen::VectorXd& v, Eigen::VectorXd& theta);

// Classify one operating point with both criteria.
ScanPoint classify_point(const ReducedNetwork& red, const std::vector<InverterParams>& params, const StabilityConstraintSet& set,
                         const Eigen::VectorXd& v, const Eigen::VectorXd& theta, double zero_tol = 1e-7);

GapRatioReport gap_ratio_scan(const ReducedNetwork& red, const std::vector<InverterParams>& params, const ScanGrid& grid,
                              const ScanOptions& options = {});

std::string scan_csv_header(std::size_t n);

}  // namespace stabopf
