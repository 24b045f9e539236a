#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mvfmm/dataset.hpp"
#include "mvfmm/fitting.hpp"

namespace mvfmm {

/// Method-of-moments Q and S as M x M coefficient matrices under the
/// tensor product of the first-stage bases. Not projected onto the PSD cone.
struct UnstructuredCov {
  std::vector<DimensionBasis> layout;
  Eigen::MatrixXd q;
  Eigen::MatrixXd s;
  double q_min_eigenvalue = 0.0;
  double s_min_eigenvalue = 0.0;
};

/// Closed-form two-regressor least squares on the per-subject sufficient
/// statistics. `centered` rows are observations with the mean removed.
UnstructuredCov unstructured_fit(const Eigen::MatrixXd& centered, std::span<const int> groups,
                                 const std::vector<DimensionBasis>& layout, int threads = 0);

/// Coefficient rows minus the model's fitted mean for each row's covariates.
Eigen::MatrixXd centered_coefficients(const FittedModel& model, const FunctionalDataset& data);

/// Convenience: centre with `model` and fit.
UnstructuredCov unstructured_fit(const FittedModel& model, const FunctionalDataset& data, int threads = 0);

enum class SurfaceKind { Q, S };

const char* to_string(SurfaceKind kind) noexcept;

/// Phi(t) C Phi(t')^T per dimension pair for a coefficient matrix C.
CovarianceSurface coefficient_surface(const std::vector<DimensionBasis>& layout, const Eigen::MatrixXd& coef,
                                      std::span<const double> grid);
CovarianceSurface surface(const UnstructuredCov& cov, SurfaceKind which, std::span<const double> grid);

/// Double trapezoid of the squared difference, summed over all blocks.
double cov_ise(const CovarianceSurface& estimate, const CovarianceSurface& reference);

/// Long CSV: which, p, p', t, t', value.
std::string surfaces_csv(const std::vector<std::pair<std::string, const CovarianceSurface*>>& surfaces);

}  // namespace mvfmm
