#include <doctest.h>

#include "helpers.hpp"
#include "mvfmm/kernels.hpp"
#include "mvfmm/parallel.hpp"

using namespace mvfmm;

// The serial references are the plain definitions; the parallel kernels use
// blocked arithmetic, so they match the reference to rounding and each other
// exactly for any thread count.

TEST_CASE("project_rows: parallel matches serial, independent of threads") {
  const Eigen::MatrixXd rows = testing::random_normal(257, 40, 1);
  const Eigen::VectorXd centre = testing::random_normal(40, 1, 2).col(0);
  const Eigen::MatrixXd proj = testing::random_normal(40, 13, 3);
  const Eigen::MatrixXd ref = kernels::project_rows_serial(rows, centre, proj);
  CHECK(testing::max_abs(ref - (rows.rowwise() - centre.transpose()) * proj) < 1e-12);
  const Eigen::MatrixXd one = kernels::project_rows(rows, centre, proj, 1);
  CHECK(testing::max_abs(one - ref) < 1e-12 * testing::max_abs(ref));
  for (int threads : {2, 3, 8}) CHECK((kernels::project_rows(rows, centre, proj, threads).array() == one.array()).all());
}

TEST_CASE("max_statistic: parallel equals serial and respects the definition") {
  const Eigen::MatrixXd basis = testing::random_normal(60, 5, 4);
  Eigen::VectorXd inv_se = testing::random_normal(60, 1, 5).col(0).cwiseAbs();
  inv_se(7) = 0.0;
  const Eigen::MatrixXd factor = testing::random_normal(5, 5, 6);
  const int draws = 3 * kernels::kDrawBlock + 17;
  const Eigen::VectorXd ref = kernels::max_statistic_serial(basis, inv_se, factor, 42, draws);
  CHECK(ref.size() == draws);
  CHECK(ref.minCoeff() >= 0.0);
  for (int threads : {1, 2, 5}) CHECK((kernels::max_statistic(basis, inv_se, factor, 42, draws, threads).array() == ref.array()).all());
  CHECK((kernels::max_statistic_serial(basis, inv_se, factor, 43, draws).array() != ref.array()).any());
  // A prefix of the draws does not depend on the total count.
  const Eigen::VectorXd head = kernels::max_statistic_serial(basis, inv_se, factor, 42, 100);
  CHECK((head.array() == ref.head(100).array()).all());
  CHECK(kernels::max_statistic_serial(basis, inv_se, Eigen::MatrixXd::Zero(5, 5), 1, 10).maxCoeff() == 0.0);
}

TEST_CASE("moment_sums: parallel matches serial and the direct sums") {
  const int n_groups = 150;
  std::vector<int> groups;
  for (int g = 0; g < n_groups; ++g)
    for (int j = 0; j <= g % 3; ++j) groups.push_back(g);
  const Eigen::MatrixXd rows = testing::random_normal(static_cast<Eigen::Index>(groups.size()), 6, 7);
  const auto ref = kernels::moment_sums_serial(rows, groups, n_groups);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_groups, 6);
  for (std::size_t i = 0; i < groups.size(); ++i) sums.row(groups[i]) += rows.row(static_cast<Eigen::Index>(i));
  CHECK(testing::max_abs(ref.subject_outer - sums.transpose() * sums) < 1e-10);
  CHECK(testing::max_abs(ref.row_outer - rows.transpose() * rows) < 1e-10);
  CHECK(ref.rows == static_cast<double>(groups.size()));
  CHECK(ref.sum_squared_sizes == 50 * (1 + 4 + 9));
  const auto one = kernels::moment_sums(rows, groups, n_groups, 1);
  CHECK(testing::max_abs(one.subject_outer - ref.subject_outer) < 1e-12 * testing::max_abs(ref.subject_outer));
  CHECK(testing::max_abs(one.row_outer - ref.row_outer) < 1e-12 * testing::max_abs(ref.row_outer));
  CHECK(one.sum_squared_sizes == ref.sum_squared_sizes);
  for (int threads : {2, 4, 7}) {
    const auto par = kernels::moment_sums(rows, groups, n_groups, threads);
    CHECK((par.subject_outer.array() == one.subject_outer.array()).all());
    CHECK((par.row_outer.array() == one.row_outer.array()).all());
  }
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  set_default_threads(2);
  CHECK(resolve_threads(0) == 2);
  set_default_threads(0);
  CHECK(resolve_threads(0) >= 1);
}
