#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvfmm/dataset.hpp"
#include "mvfmm/fitting.hpp"
#include "mvfmm/mvfpca.hpp"

namespace mvfmm::sim {

/// Scenario 1: fixed effects, random intercepts and residuals share one
/// FPC basis. Scenario 2: random intercepts on a split Fourier basis,
/// residuals on a split Legendre basis.
struct ScenarioConfig {
  int scenario = 1;
  int subjects = 280;
  int sides = 2;
  int grid_points = 101;
  double domain_end = 100.0;
  std::vector<std::string> dimensions{"hip", "knee"};
  int components = 13;
  /// Per-dimension cubic B-splines carrying the shared generator basis.
  int generator_size = 10;
  /// Per-dimension cubic B-splines of the analysis (first-stage) basis.
  int analysis_size = 80;
  double total_variance = 5000.0;
  double decay = 0.6;
  double icc = 0.78;
  double sex_probability = 0.39;
  double speed_mean = 11.0;
  double speed_sd = 1.6;
  double pve = 0.9999;
  std::uint64_t seed = 20240611;
  /// 3 x components; the built-in gait-like effects when unset.
  std::optional<Eigen::MatrixXd> fixed_effects;
  std::optional<Eigen::VectorXd> q;
  std::optional<Eigen::VectorXd> s;

  void validate() const;
};

/// Everything a replicate is compared against, shared across replicates.
struct Truth {
  ScenarioConfig config;
  std::vector<double> grid;
  std::vector<DimensionBasis> analysis_layout;
  MvFpcBasis generator;           ///< shared FPC basis on the generator splines
  Eigen::MatrixXd fixed_effects;  ///< 3 x components on `generator`
  Eigen::VectorXd q;
  Eigen::VectorXd s;
  /// Analysis-basis coefficients (rows) of the random-intercept and residual
  /// basis functions and of the three effect functions.
  Eigen::MatrixXd u_coefficients;
  Eigen::MatrixXd e_coefficients;
  Eigen::MatrixXd effect_coefficients;
  /// Per effect, per dimension values on `grid`.
  std::array<std::vector<Eigen::VectorXd>, 3> effects;
  CovarianceSurface q_surface;
  CovarianceSurface s_surface;
  double icc = 0.0;
};

Truth build_truth(const ScenarioConfig& config);

/// Geometric variance profile split into (q, s) with share `icc` in q.
std::pair<Eigen::VectorXd, Eigen::VectorXd> default_variances(const ScenarioConfig& config);

/// The shared FPC basis: leading W-eigenfunctions of a smooth covariance on
/// the generator splines.
MvFpcBasis generator_basis(const ScenarioConfig& config);

struct SimulatedData {
  FunctionalDataset data;
  Eigen::MatrixXd u_scores;  ///< subjects x components
  Eigen::MatrixXd e_scores;  ///< rows x components
};

/// Replicate `replicate` of the scenario; deterministic in (seed, replicate).
SimulatedData generate_dataset(const Truth& truth, int replicate);

/// Trapezoid integral of the squared difference, summed over dimensions.
double fixed_effect_ise(const std::vector<Eigen::VectorXd>& estimate, const std::vector<Eigen::VectorXd>& truth,
                        const std::vector<double>& grid);

struct StudyOptions {
  int replicates = 200;
  int bootstrap = 200;
  int draws = 2000;
  double level = 0.95;
  bool inference = true;
  int threads = 0;

  static StudyOptions reduced() { return {}; }
  static StudyOptions full_scale() { return {500, 1000, 10000, 0.95, true, 0}; }
};

enum Method { kWald = 0, kBootstrap = 1 };
inline constexpr int kEffects = 3;

struct ReplicateResult {
  bool ok = false;
  std::string error;
  int k_retained = 0;
  std::array<double, kEffects> ise_beta{};
  double ise_q_model = 0, ise_s_model = 0, ise_q_unstructured = 0, ise_s_unstructured = 0;
  double icc = 0;
  double icc_lower = 0, icc_upper = 0;
  bool icc_covered = false;
  /// [method][effect]: per (dimension, t) hit flags, dimension-major.
  std::array<std::array<std::vector<unsigned char>, kEffects>, 2> pointwise_hit;
  std::array<std::array<bool, kEffects>, 2> simultaneous_hit{};
  std::array<std::array<double, kEffects>, 2> simultaneous_multiplier{};
  double pointwise_multiplier = 0;
};

struct StudyResult {
  ScenarioConfig config;
  StudyOptions options;
  std::vector<double> grid;
  std::vector<std::string> dimensions;
  double true_icc = 0;
  std::vector<ReplicateResult> replicates;

  int successes() const;
  int failures() const { return static_cast<int>(replicates.size()) - successes(); }
  /// Per (dimension, t) pointwise coverage for one method and effect.
  Eigen::VectorXd coverage_profile(int method, int effect) const;
  double pointwise_coverage(int method, int effect) const;
  double simultaneous_coverage(int method, int effect) const;
  double icc_coverage() const;
  std::vector<double> icc_values() const;
  std::vector<double> metric(double ReplicateResult::*field) const;
  std::vector<double> ise_beta(int effect) const;
};

/// One replicate of the study pipeline.
ReplicateResult run_replicate(const Truth& truth, const StudyOptions& options, int replicate);

/// Replicates run in parallel; each owns its random streams, so the result
/// does not depend on the thread count.
StudyResult run_study(const ScenarioConfig& config, const StudyOptions& options);

struct CoverageRow {
  std::string method;
  std::string type;
  int scenario;
  int effect;
  double estimate;
  double mc_se;
};

/// (method, coverage type, scenario, effect) rows for every study given.
std::vector<CoverageRow> coverage_table(const std::vector<const StudyResult*>& studies);

std::string coverage_table_csv(const std::vector<CoverageRow>& rows);
std::string ise_csv(const std::vector<const StudyResult*>& studies);
std::string icc_csv(const std::vector<const StudyResult*>& studies);
std::string coverage_profile_csv(const std::vector<const StudyResult*>& studies);

}  // namespace mvfmm::sim
