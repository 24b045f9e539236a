#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mvfmm/basis.hpp"

namespace mvfmm {

/// Multivariate FPC basis expressed through per-dimension first-stage bases.
///
/// Row k of `eigencoefs` is the concatenated coefficient vector c_k of
/// psi_k; rows are orthonormal under the block-diagonal Gram metric `gram`
/// (c_k^T W c_l = delta_kl).
struct MvFpcBasis {
  std::vector<DimensionBasis> layout;
  Eigen::VectorXd mean;              ///< M, column mean of the training coefficients
  Eigen::VectorXd eigenvalues;       ///< retained, descending
  Eigen::VectorXd all_eigenvalues;   ///< every non-negligible eigenvalue, descending
  Eigen::MatrixXd eigencoefs;        ///< retained K x M
  Eigen::MatrixXd gram;              ///< M x M block diagonal
  double pve_target = 0.9999;

  int n_components() const { return static_cast<int>(eigencoefs.rows()); }
  int total_size() const { return static_cast<int>(mean.size()); }
  int dimensions() const { return static_cast<int>(layout.size()); }
  int offset(std::size_t dimension) const;

  /// Cumulative proportion of variance for every non-negligible component.
  Eigen::VectorXd cumulative_pve() const;

  /// |grid| x K values of the `dimension`-th components of psi_1..psi_K.
  Eigen::MatrixXd component_on_grid(std::size_t dimension, std::span<const double> grid) const;
};

struct MvFpcaOptions {
  double pve_target = 0.9999;
  /// Cap on retained components; 0 means min(n - 1, M).
  int k_max = 0;
};

/// Block-diagonal Gram metric for `layout`.
Eigen::MatrixXd block_gram(const std::vector<DimensionBasis>& layout);

/// mv-FPCA of coefficient rows under the Gram metric of `layout`.
MvFpcBasis mvfpca_fit(const Eigen::MatrixXd& coeffs, const std::vector<DimensionBasis>& layout,
                      const MvFpcaOptions& options = {});
/// As above with precomputed per-dimension Gram matrices.
MvFpcBasis mvfpca_fit(const Eigen::MatrixXd& coeffs, const std::vector<DimensionBasis>& layout,
                      const std::vector<Eigen::MatrixXd>& grams, const MvFpcaOptions& options = {});

/// Eigen-decomposition of a coefficient covariance `cov` under metric `gram`:
/// returns (eigenvalues, eigencoefs as rows) for every eigenvalue above
/// 1e-12 of the largest, with the largest-|entry| of each row made positive.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> metric_eigen(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& gram);

/// Scores (theta_i - centering)^T W c_k, centering = mean when `centered`.
Eigen::MatrixXd project_scores(const MvFpcBasis& basis, const Eigen::MatrixXd& coeffs, bool centered,
                               int threads = 0);

/// Per-dimension curves (n x |grid|) of sum_k score_k psi_k (+ mean when `add_mean`).
std::vector<Eigen::MatrixXd> reconstruct(const MvFpcBasis& basis, const Eigen::MatrixXd& scores,
                                         std::span<const double> grid, bool add_mean);

struct ScreeRow {
  int k;
  double eigenvalue;
  double cumulative_pve;
};

std::vector<ScreeRow> scree_report(const MvFpcBasis& basis);

}  // namespace mvfmm
