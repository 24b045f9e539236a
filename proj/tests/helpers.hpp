#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "mvfmm/dataset.hpp"
#include "mvfmm/fitting.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mvfmm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Eigen::MatrixXd random_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Two sides per subject with covariates sex (0/1) and speed. Rows are
/// B x + u_subject + e with x = (1, sex, speed - 11), every coefficient
/// independent normal with standard deviations `u_sd` and `e_sd`.
struct SmallStudy {
  mvfmm::FunctionalDataset data;
  Eigen::MatrixXd effects;  ///< 3 x M
};

inline SmallStudy small_study(int subjects, std::vector<mvfmm::DimensionBasis> layout, double u_sd, double e_sd,
                              std::uint64_t seed) {
  int M = 0;
  for (const auto& d : layout) M += d.basis.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  SmallStudy out;
  out.effects = random_normal(3, M, seed + 1);
  out.data.layout = std::move(layout);
  out.data.covariates = mvfmm::CovariateTable({"sex", "speed"});
  out.data.coefficients.resize(2 * subjects, M);
  for (int i = 0; i < subjects; ++i) {
    const std::string name = "S" + std::to_string(100 + i);
    const double sex = (i % 3 == 0) ? 1.0 : 0.0;
    const double speed = 11.0 + 1.6 * n(rng);
    out.data.covariates.set(name, std::nullopt, {sex, speed});
    Eigen::RowVectorXd u(M);
    for (int m = 0; m < M; ++m) u(m) = u_sd * n(rng);
    for (int side = 0; side < 2; ++side) {
      out.data.keys.push_back({name, side == 0 ? mvfmm::Side::Left : mvfmm::Side::Right, 0});
      Eigen::RowVectorXd row = out.effects.row(0) + sex * out.effects.row(1) + (speed - 11.0) * out.effects.row(2) + u;
      for (int m = 0; m < M; ++m) row(m) += e_sd * n(rng);
      out.data.coefficients.row(2 * i + side) = row;
    }
  }
  return out;
}

inline mvfmm::ModelSpec sex_speed_spec() {
  mvfmm::ModelSpec spec;
  spec.covariates.push_back({"sex", mvfmm::CovariateKind::Categorical, true, 0.0});
  spec.covariates.push_back({"speed", mvfmm::CovariateKind::Continuous, true, std::nullopt});
  return spec;
}

}  // namespace testing
