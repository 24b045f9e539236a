#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mvfmm/types.hpp"

namespace mvfmm {

enum class BasisKind { BSpline, Fourier, Legendre };

const char* to_string(BasisKind kind) noexcept;
BasisKind parse_basis_kind(const std::string& text);

/// A univariate basis on [0, T].
///
/// - B-spline: `order` (4 = cubic), uniform interior knots, boundary knots
///   repeated `order` times.
/// - Fourier: 1/sqrt(T), then sqrt(2/T) sin(2 pi j t/T), sqrt(2/T) cos(2 pi j t/T)
///   for j = 1, 2, ...; orthonormal on [0, T].
/// - Legendre: shifted Legendre polynomials scaled to be orthonormal on [0, T].
class BasisSystem {
 public:
  static BasisSystem bspline(int size, int order, double domain_end);
  static BasisSystem fourier(int size, double domain_end);
  static BasisSystem legendre(int degree, double domain_end);

  BasisKind kind() const noexcept { return kind_; }
  int size() const noexcept { return size_; }
  int order() const noexcept { return order_; }
  double domain_end() const noexcept { return domain_end_; }
  const std::vector<double>& knots() const noexcept { return knots_; }

  /// |grid| x size matrix of basis values.
  Eigen::MatrixXd evaluate(std::span<const double> grid) const;

  bool operator==(const BasisSystem&) const = default;

 private:
  BasisKind kind_ = BasisKind::BSpline;
  int size_ = 0;
  int order_ = 0;
  double domain_end_ = 1.0;
  std::vector<double> knots_;

  void bspline_row(double t, double* out) const;
};

BasisSystem make_bspline(int size, int order = 4, double domain_end = 100.0);

Eigen::MatrixXd eval_basis(const BasisSystem& basis, std::span<const double> grid);

/// Ordinary least squares coefficients of `values` observed on `grid`.
Eigen::VectorXd fit_coefficients(std::span<const double> values, std::span<const double> grid,
                                 const BasisSystem& basis);

/// Reusable least-squares solver for many curves sampled on one grid.
class LeastSquaresFitter {
 public:
  LeastSquaresFitter(const BasisSystem& basis, std::span<const double> grid);

  Eigen::VectorXd fit(const Eigen::Ref<const Eigen::VectorXd>& values) const;
  /// Each row of `values` is one curve on the grid; returns one coefficient row per curve.
  Eigen::MatrixXd fit_rows(const Eigen::Ref<const Eigen::MatrixXd>& values) const;

 private:
  Eigen::MatrixXd solve_;  // size x |grid|, the least-squares solution operator
};

/// Composite Simpson approximation of the Gram matrix, symmetrised.
Eigen::MatrixXd gram_matrix(const BasisSystem& basis, int quadrature_points = 1001);

/// Composite Simpson weights on `points` equispaced nodes over [0, domain_end].
Eigen::VectorXd simpson_weights(int points, double domain_end);

/// A labelled per-dimension basis, e.g. {"hip", bspline(80)}.
struct DimensionBasis {
  std::string label;
  BasisSystem basis;

  bool operator==(const DimensionBasis&) const = default;
};

struct DimensionLayout {
  std::string label;
  int size = 0;
};

struct CurveKey {
  std::string subject;
  Side side = Side::Left;
  int stride = 0;
};

/// First-stage coefficients, one row per curve, dimensions concatenated in
/// `layout` order.
struct CoefficientSet {
  std::vector<DimensionLayout> layout;
  std::vector<CurveKey> keys;
  Eigen::MatrixXd values;

  int total_size() const;
  int offset(std::size_t dimension) const;
};

/// Mean coefficient row per (subject, side), in order of first appearance.
CoefficientSet average_by_group(const CoefficientSet& coeffs);

/// Multivariate basis obtained by cutting an orthonormal basis on
/// [0, P*T] into P consecutive pieces of length T.
class SplitBasis {
 public:
  SplitBasis(BasisSystem univariate, int dimensions);

  int size() const noexcept { return univariate_.size(); }
  int dimensions() const noexcept { return dimensions_; }
  double segment_length() const noexcept { return univariate_.domain_end() / dimensions_; }
  const BasisSystem& univariate() const noexcept { return univariate_; }

  /// |grid| x size values of the `dimension`-th component, grid in [0, T].
  Eigen::MatrixXd evaluate(int dimension, std::span<const double> grid) const;

 private:
  BasisSystem univariate_;
  int dimensions_;
};

/// Validates orthonormality of `univariate` on its domain (tolerance 1e-6)
/// before splitting.
SplitBasis split_multivariate_basis(const BasisSystem& univariate, int dimensions);

}  // namespace mvfmm
