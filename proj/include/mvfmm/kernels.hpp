#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference and an
// OpenMP version; the tests hold the two against each other and the bench
// target times them.

#include <Eigen/Dense>
#include <cstdint>
#include <span>

namespace mvfmm::kernels {

/// out = (rows - 1 centering^T) * projection.
Eigen::MatrixXd project_rows_serial(const Eigen::MatrixXd& rows, const Eigen::VectorXd& centering,
                                    const Eigen::MatrixXd& projection);
Eigen::MatrixXd project_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& centering,
                             const Eigen::MatrixXd& projection, int threads = 0);

/// Draws handled by one random stream in `max_statistic`.
inline constexpr int kDrawBlock = 256;

/// Simultaneous-band max statistic: for r = 1..draws, z_r = max_g |(basis * factor * e_r)_g| * inv_se_g
/// with e_r standard normal. `basis` is G x K (all grid points of all
/// dimensions stacked), `inv_se` holds 1/se or 0 for excluded points,
/// `factor` is K x K with factor * factor^T the coefficient covariance.
/// Draw block b uses stream (seed, b), so the result is schedule-independent.
Eigen::VectorXd max_statistic_serial(const Eigen::MatrixXd& basis, const Eigen::VectorXd& inv_se,
                                     const Eigen::MatrixXd& factor, std::uint64_t seed, int draws);
Eigen::VectorXd max_statistic(const Eigen::MatrixXd& basis, const Eigen::VectorXd& inv_se,
                              const Eigen::MatrixXd& factor, std::uint64_t seed, int draws,
                              int threads = 0);

/// Sufficient statistics for the method-of-moments covariance estimator.
struct MomentSums {
  Eigen::MatrixXd subject_outer;  ///< sum_i (sum_j y_ij)(sum_j y_ij)^T
  Eigen::MatrixXd row_outer;      ///< sum_ij y_ij y_ij^T
  double sum_squared_sizes = 0;   ///< sum_i n_i^2
  double rows = 0;                ///< sum_i n_i
};

MomentSums moment_sums_serial(const Eigen::MatrixXd& rows, std::span<const int> groups, int n_groups);
/// Subjects are accumulated in fixed blocks and the block partials reduced
/// in block order, so the result does not depend on the thread count.
MomentSums moment_sums(const Eigen::MatrixXd& rows, std::span<const int> groups, int n_groups,
                       int threads = 0);

}  // namespace mvfmm::kernels
