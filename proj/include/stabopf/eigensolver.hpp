#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stabopf {

class EigenError : public std::runtime_error {
  public:
    EigenError(const std::string& what, double condition, double norm, std::size_t unconverged)
        : std::runtime_error(what), condition_(condition), norm_(norm), unconverged_(unconverged) {}
    double condition() const noexcept { return condition_; }
    double frobenius_norm() const noexcept { return norm_; }
    // Active block size when iteration stopped.
    std::size_t unconverged() const noexcept { return unconverged_; }

  private:
    double condition_;
    double norm_;
    std::size_t unconverged_;
};

// All eigenvalues of a dense real square matrix: balancing, Householder
// reduction to upper Hessenberg form, Francis double-shift QR.
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A, int max_iterations_per_eigenvalue = 60);

// In-place building blocks, exposed for tests.
Eigen::VectorXd balance(Eigen::MatrixXd& A);
void to_hessenberg(Eigen::MatrixXd& A);

struct EigenReport {
    std::vector<std::complex<double>> eigenvalues;
    std::optional<std::size_t> trivial_zero_index;
    double smallest_modulus = 0.0;
    double max_re = 0.0;  // over eigenvalues other than the removed trivial mode
    bool stable = false;  // max_re < 0
    bool trivial_mode_missing = false;  // smallest modulus exceeded zero_tol; nothing removed
};

EigenReport eigen_stability(const Eigen::MatrixXd& A, double zero_tol = 1e-7);

}  // namespace stabopf
