#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvfmm/dataset.hpp"
#include "mvfmm/fitting.hpp"

namespace mvfmm {

enum class BandKind { PointwiseWald, PointwiseBoot, Simultaneous };

const char* to_string(BandKind kind) noexcept;

/// point +- multiplier * se on a grid, one vector per dimension.
struct Band {
  int effect = 0;
  BandKind kind = BandKind::PointwiseWald;
  double level = 0.95;
  double multiplier = 0.0;
  std::vector<double> grid;
  std::vector<std::string> dimensions;
  std::vector<Eigen::VectorXd> point;
  std::vector<Eigen::VectorXd> se;
  std::vector<Eigen::VectorXd> lower;
  std::vector<Eigen::VectorXd> upper;
  bool variance_clamped = false;  ///< a negative pointwise variance was set to zero
  int excluded_points = 0;        ///< simultaneous: points left out of the max statistic
};

/// Pointwise band from a K x K coefficient covariance of effect `a`.
Band pointwise_band(const FittedModel& model, int a, std::span<const double> grid, const Eigen::MatrixXd& cov,
                    double level, BandKind kind);

/// Gaussian pointwise band from the Wald variances of the score models.
Band wald_pointwise(const FittedModel& model, int a, std::span<const double> grid, double level = 0.95);

/// Diagonal Wald covariance of effect `a`.
Eigen::MatrixXd wald_covariance(const FittedModel& model, int a);

struct SimultaneousOptions {
  int draws = 10000;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 0;
};

/// Max-statistic band: Gaussian coefficient draws with covariance `cov`,
/// multiplier = ceiling-index (level) order statistic of the draws' max |z|.
Band simultaneous_band(const FittedModel& model, int a, std::span<const double> grid, const Eigen::MatrixXd& cov,
                       const SimultaneousOptions& options = {});

/// Symmetric factor F with F F^T = cov after flooring negative eigenvalues;
/// a covariance error if negativity exceeds 1e-8 of the largest eigenvalue.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov);

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  /// Test hook: every replicate reuses the original subjects.
  bool identity_resample = false;
  RemlOptions reml;
};

struct BootstrapResult {
  int replicates = 0;                      ///< successful replicates
  int failures = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> samples;    ///< per effect: replicates x K of beta*_a
  std::vector<Eigen::MatrixXd> covariance; ///< per effect: K x K, (B - 1) denominator
  Eigen::VectorXd icc_samples;
};

/// Subject indices drawn with replacement for bootstrap replicate `replicate`.
std::vector<int> resample_subjects(int n_subjects, std::uint64_t seed, int replicate);

/// Subjects resampled with replacement, each draw a new pseudo-subject;
/// scores are projections on the fitted model's basis and the design keeps
/// the fitted model's coding.
BootstrapResult bootstrap_of_subjects(const FunctionalDataset& data, const FittedModel& model,
                                      const BootstrapOptions& options = {});

/// Percentile interval at order statistics ceil(B alpha/2), ceil(B (1 - alpha/2)).
std::pair<double, double> icc_interval(std::span<const double> samples, double level = 0.95);

/// Monte Carlo standard error of a proportion.
double mc_se(double p, int n_sim);

/// Long CSV: effect, dimension, t, point, se, lower, upper, kind, level, multiplier.
std::string bands_csv(const std::vector<Band>& bands, const std::vector<std::string>& effect_names);

}  // namespace mvfmm
