#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <vector>

namespace mvfmm {

/// y = X beta + u_group + e with u ~ N(0, q), e ~ N(0, s).
struct LmmDesign {
  Eigen::VectorXd response;
  Eigen::MatrixXd X;         ///< n x p, intercept first
  std::vector<int> groups;   ///< group id per observation, 0-based
};

struct RemlOptions {
  double lambda_max = 1e6;
  double tolerance = 1e-10;  ///< on log(1 + lambda)
  int max_iterations = 200;
};

struct LmmFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;
  double q = 0.0;
  double s = 0.0;
  double lambda = 0.0;
  double reml_value = 0.0;
  bool converged = false;
  bool boundary = false;   ///< lambda = 0 chosen
  bool at_upper = false;   ///< optimum at lambda_max
};

/// Fixed-design side of the restricted likelihood. Everything that depends
/// only on X and the grouping is aggregated by group size once, so each
/// likelihood evaluation for a new response costs O(p^3) regardless of n.
class RemlProblem {
 public:
  RemlProblem(Eigen::MatrixXd X, std::vector<int> groups);

  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index p() const { return X_.cols(); }
  int n_groups() const { return n_groups_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const std::vector<int>& groups() const { return groups_; }

  /// Restricted log-likelihood with the residual variance profiled out, up
  /// to an additive constant.
  double profile_loglik(const Eigen::VectorXd& y, double lambda) const;

  LmmFit fit(const Eigen::VectorXd& y, const RemlOptions& options = {}) const;

 private:
  struct SizeClass {
    double size = 0;
    double count = 0;
    Eigen::MatrixXd sx_outer;  ///< sum over groups of (sum x)(sum x)^T
  };
  struct ResponseStats;

  ResponseStats response_stats(const Eigen::VectorXd& y) const;
  double evaluate(const ResponseStats& stats, double lambda, Eigen::VectorXd* beta, Eigen::MatrixXd* xvx_inv,
                  double* rss) const;
  /// Derivative of `evaluate` in lambda.
  double slope(const ResponseStats& stats, double lambda) const;

  Eigen::MatrixXd X_;
  std::vector<int> groups_;
  int n_groups_ = 0;
  Eigen::MatrixXd xtx_;
  std::vector<SizeClass> classes_;
  std::vector<int> class_of_group_;
  std::vector<int> group_size_;
};

LmmFit reml_fit(const LmmDesign& design, const RemlOptions& options = {});

double profile_loglik(const LmmDesign& design, double lambda);

/// Random-intercept predictions (lambda n_i / (1 + lambda n_i)) * mean group residual.
Eigen::VectorXd fitted_blups(const LmmFit& fit, const LmmDesign& design);

}  // namespace mvfmm
