#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mvfmm/basis.hpp"
#include "mvfmm/ingest.hpp"

namespace mvfmm {

/// Modelling dataset: one first-stage coefficient row per (subject, side).
struct FunctionalDataset {
  std::vector<DimensionBasis> layout;
  std::vector<CurveKey> keys;
  Eigen::MatrixXd coefficients;
  CovariateTable covariates;

  int total_size() const;
  int offset(std::size_t dimension) const;
  Eigen::Index rows() const { return coefficients.rows(); }

  /// Subject index per row (order of first appearance) and the number of subjects.
  std::vector<int> subject_groups(int* n_subjects = nullptr) const;

  /// Rows restricted to `indices` (in that order), covariates shared.
  FunctionalDataset subset(const std::vector<Eigen::Index>& indices) const;
};

/// Preprocessing applied between parsing and modelling.
struct PreprocessConfig {
  std::vector<DimensionBasis> dimensions;
  std::string landmark_dimension;
  /// Registration target; the mean landmark time over all strides when unset.
  std::optional<double> target;
  bool register_landmark = true;
  int grid_points = 101;
  double domain_end = 100.0;
};

/// normalise -> register -> resample to the common grid -> least-squares
/// coefficients per dimension -> average strides per (subject, side).
FunctionalDataset build_dataset(const ParsedInput& input, const PreprocessConfig& config);

/// Registration target that `build_dataset` would use for `input`.
double mean_landmark_time(const ParsedInput& input, const PreprocessConfig& config);

}  // namespace mvfmm
