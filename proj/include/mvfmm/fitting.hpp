#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvfmm/dataset.hpp"
#include "mvfmm/lmm.hpp"
#include "mvfmm/mvfpca.hpp"

namespace mvfmm {

enum class CovariateKind { Continuous, Categorical };

const char* to_string(CovariateKind kind) noexcept;
CovariateKind parse_covariate_kind(const std::string& text);

struct CovariateSpec {
  std::string name;
  CovariateKind kind = CovariateKind::Continuous;
  bool center = true;                ///< continuous only
  std::optional<double> reference;   ///< categorical only; smallest level when unset
};

/// Fixed-effects part of the model; the grouping factor is always the subject.
struct ModelSpec {
  std::vector<CovariateSpec> covariates;
};

/// ModelSpec resolved against training data: centres, levels, column names.
struct DesignCoding {
  struct Term {
    std::string name;
    CovariateKind kind = CovariateKind::Continuous;
    double center = 0.0;
    double reference = 0.0;
    std::vector<double> levels;  ///< non-reference levels, ascending
  };

  std::vector<Term> terms;
  std::vector<std::string> column_names;  ///< "(Intercept)" first

  int columns() const { return static_cast<int>(column_names.size()); }

  static DesignCoding resolve(const ModelSpec& spec, const FunctionalDataset& data);

  /// Design row for one covariate assignment. Missing continuous values take
  /// the centre, missing categorical values the reference level.
  Eigen::RowVectorXd encode(const std::map<std::string, double>& values) const;
  Eigen::MatrixXd design(const FunctionalDataset& data) const;
};

struct ScoreFitReport {
  int k = 0;
  double lambda = 0.0;
  bool converged = true;
  bool boundary = false;
  bool at_upper = false;
};

/// Per-score scalar mixed models collected into matrices.
struct ScoreFits {
  Eigen::MatrixXd bstar;     ///< (A+1) x K
  Eigen::MatrixXd wald_var;  ///< (A+1) x K, Var(beta*_ak)
  Eigen::VectorXd qstar;
  Eigen::VectorXd sstar;
  std::vector<ScoreFitReport> reports;
};

/// Fits one random-intercept model per score column with a shared design.
ScoreFits fit_scores(const Eigen::MatrixXd& scores, const RemlProblem& problem, const RemlOptions& options = {},
                     int threads = 1);

struct FittedModel {
  MvFpcBasis basis;
  ModelSpec spec;
  DesignCoding coding;
  Eigen::MatrixXd bstar;
  Eigen::MatrixXd wald_var;
  Eigen::VectorXd qstar;
  Eigen::VectorXd sstar;
  std::vector<ScoreFitReport> reports;
  /// Part of the coefficient mean outside the FPC span, added to the
  /// intercept function (zero when restoration is disabled).
  Eigen::VectorXd mean_residual;
  double icc = 0.0;
  /// Optional full K x K coefficient covariance per effect (bootstrap).
  std::optional<std::vector<Eigen::MatrixXd>> boot_cov;

  int n_effects() const { return static_cast<int>(bstar.rows()); }
  int n_components() const { return static_cast<int>(bstar.cols()); }
};

struct FitOptions {
  MvFpcaOptions fpca;
  RemlOptions reml;
  bool restore_mean_residual = true;
  int threads = 0;
};

FittedModel fit_model(const FunctionalDataset& data, const ModelSpec& spec, const FitOptions& options = {});

/// As `fit_model` with the FPC basis supplied instead of estimated.
FittedModel fit_model_with_basis(const FunctionalDataset& data, const ModelSpec& spec, MvFpcBasis basis,
                                 const FitOptions& options = {});

/// beta_a^(p)(t) on `grid` for every dimension p.
std::vector<Eigen::VectorXd> effect_function(const FittedModel& model, int a, std::span<const double> grid);

/// Matrix-valued covariance on a grid; block (p, p') is stored at p * P + p'.
struct CovarianceSurface {
  std::vector<double> grid;
  std::vector<std::string> dimensions;
  std::vector<Eigen::MatrixXd> blocks;

  int n_dimensions() const { return static_cast<int>(dimensions.size()); }
  const Eigen::MatrixXd& block(int p, int q) const { return blocks[static_cast<std::size_t>(p * n_dimensions() + q)]; }
  /// P|grid| x P|grid| matrix with dimension-major blocks.
  Eigen::MatrixXd stacked() const;
};

/// Psi(t)^T diag(weights) Psi(t') for the model basis.
CovarianceSurface diagonal_surface(const MvFpcBasis& basis, const Eigen::VectorXd& weights,
                                   std::span<const double> grid);
CovarianceSurface reconstruct_q(const FittedModel& model, std::span<const double> grid);
CovarianceSurface reconstruct_s(const FittedModel& model, std::span<const double> grid);

/// sum q / (sum q + sum s).
double icc(const Eigen::VectorXd& q, const Eigen::VectorXd& s);
double icc(const FittedModel& model);

/// Mean curve for a covariate assignment, coded as in `DesignCoding::encode`.
std::vector<Eigen::VectorXd> predict_mean(const FittedModel& model, const std::map<std::string, double>& covariates,
                                          std::span<const double> grid);

/// Per-dimension values of a concatenated first-stage coefficient vector.
std::vector<Eigen::VectorXd> evaluate_coefficients(const std::vector<DimensionBasis>& layout,
                                                   const Eigen::VectorXd& coefficients,
                                                   std::span<const double> grid);

}  // namespace mvfmm
