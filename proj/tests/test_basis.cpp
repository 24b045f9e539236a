#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "mvfmm/basis.hpp"
#include "mvfmm/error.hpp"
#include "mvfmm/types.hpp"

using namespace mvfmm;

TEST_CASE("B-spline knots and partition of unity") {
  const BasisSystem b = make_bspline(10);
  CHECK(b.knots().size() == 14);
  for (int i = 0; i < 4; ++i) {
    CHECK(b.knots()[static_cast<std::size_t>(i)] == 0.0);
    CHECK(b.knots()[b.knots().size() - 1 - static_cast<std::size_t>(i)] == 100.0);
  }
  CHECK(std::is_sorted(b.knots().begin(), b.knots().end()));
  const auto grid = uniform_grid(1001, 100.0);
  const Eigen::MatrixXd phi = b.evaluate(grid);
  CHECK((phi.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-13);
  CHECK(phi.minCoeff() >= 0.0);
  CHECK_THROWS_AS(make_bspline(3), Error);
  CHECK_THROWS_AS(BasisSystem::fourier(5, -1.0), Error);
}

TEST_CASE("cubic B-splines reproduce cubic polynomials") {
  const auto grid = uniform_grid(101, 100.0);
  std::vector<double> values;
  for (double t : grid) values.push_back(2.0 - 0.3 * t + 0.01 * t * t - 1e-4 * t * t * t);
  for (int size : {4, 10, 80}) {
    const BasisSystem b = make_bspline(size);
    const Eigen::VectorXd c = fit_coefficients(values, grid, b);
    const Eigen::VectorXd fitted = b.evaluate(grid) * c;
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(fitted(static_cast<Eigen::Index>(i)) - values[i]) < 1e-10);
  }
}

TEST_CASE("Fourier and Legendre systems are orthonormal") {
  const BasisSystem fourier = BasisSystem::fourier(13, 100.0);
  CHECK(testing::max_abs(gram_matrix(fourier) - Eigen::MatrixXd::Identity(13, 13)) < 1e-8);
  // Degree-12 polynomial integrands are not resolved to 1e-8 by 1001 nodes.
  const BasisSystem legendre = BasisSystem::legendre(6, 100.0);
  CHECK(testing::max_abs(gram_matrix(legendre) - Eigen::MatrixXd::Identity(7, 7)) < 1e-7);
  CHECK(testing::max_abs(gram_matrix(legendre, 20001) - Eigen::MatrixXd::Identity(7, 7)) < 1e-10);
  const BasisSystem f = BasisSystem::fourier(3, 100.0);
  const std::vector<double> t{25.0};
  const Eigen::MatrixXd v = f.evaluate(t);
  CHECK(v(0, 0) == doctest::Approx(0.1));
  CHECK(v(0, 1) == doctest::Approx(std::sqrt(0.02)));  // sin(pi/2)
  CHECK(std::abs(v(0, 2)) < 1e-12);                     // cos(pi/2)
}

TEST_CASE("gram matrix of B-splines is symmetric PSD and matches a fine rule") {
  const BasisSystem b = make_bspline(20);
  const Eigen::MatrixXd G = gram_matrix(b);
  CHECK(testing::max_abs(G - G.transpose()) == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  // Knots off the quadrature nodes limit Simpson to about 1e-7 relative.
  const Eigen::MatrixXd fine = gram_matrix(b, 20001);
  CHECK(testing::max_abs(G - fine) < 1e-6 * testing::max_abs(fine));
  // Integral of B_j is (t_{j+4} - t_j) / 4.
  const Eigen::VectorXd w = simpson_weights(1001, 100.0);
  CHECK(w.sum() == doctest::Approx(100.0).epsilon(1e-14));
  const Eigen::MatrixXd phi = b.evaluate(uniform_grid(1001, 100.0));
  const Eigen::VectorXd integrals = phi.transpose() * w;
  for (int j = 0; j < b.size(); ++j) {
    const auto& k = b.knots();
    CHECK(integrals(j) == doctest::Approx((k[static_cast<std::size_t>(j) + 4] - k[static_cast<std::size_t>(j)]) / 4.0).epsilon(1e-6));
  }
}

TEST_CASE("split bases partition the orthonormal univariate system") {
  const double T = 100.0;
  const SplitBasis one = split_multivariate_basis(BasisSystem::fourier(5, T), 1);
  const std::vector<double> g{0.0, 33.0, 100.0};
  CHECK(testing::max_abs(one.evaluate(0, g) - BasisSystem::fourier(5, T).evaluate(g)) == 0.0);

  const SplitBasis two = split_multivariate_basis(BasisSystem::fourier(13, 2 * T), 2);
  CHECK(two.segment_length() == T);
  const auto grid = uniform_grid(1001, T);
  const Eigen::VectorXd w = simpson_weights(1001, T);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(13, 13);
  for (int p = 0; p < 2; ++p) {
    const Eigen::MatrixXd v = two.evaluate(p, grid);
    G += v.transpose() * w.asDiagonal() * v;
  }
  CHECK(testing::max_abs(G - Eigen::MatrixXd::Identity(13, 13)) < 1e-8);
  // The constant function is 1/sqrt(2T) on both pieces.
  for (int p = 0; p < 2; ++p) CHECK(two.evaluate(p, g).col(0).array().isApproxToConstant(1.0 / std::sqrt(2 * T)));

  const SplitBasis poly = split_multivariate_basis(BasisSystem::legendre(12, 2 * T), 2);
  CHECK(poly.size() == 13);
  // Second piece of a univariate function is its restriction to [T, 2T].
  const std::vector<double> shifted{T, T + 33.0, 2 * T};
  CHECK(testing::max_abs(poly.evaluate(1, g) - poly.univariate().evaluate(shifted)) < 1e-12);

  try {
    split_multivariate_basis(make_bspline(10, 4, 2 * T), 2);
    FAIL("non-orthonormal input accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("average_by_group averages strides in order of first appearance") {
  CoefficientSet cs;
  cs.layout = {{"hip", 2}};
  cs.keys = {{"b", Side::Left, 1}, {"a", Side::Right, 1}, {"b", Side::Left, 2}};
  cs.values.resize(3, 2);
  cs.values << 1, 2, 10, 20, 3, 6;
  const CoefficientSet avg = average_by_group(cs);
  REQUIRE(avg.values.rows() == 2);
  CHECK(avg.keys[0].subject == "b");
  CHECK(avg.values(0, 0) == 2.0);
  CHECK(avg.values(0, 1) == 4.0);
  CHECK(avg.values(1, 0) == 10.0);
}

TEST_CASE("least-squares fitter agrees with the normal equations") {
  const BasisSystem b = make_bspline(12);
  const auto grid = uniform_grid(101, 100.0);
  const Eigen::MatrixXd Y = testing::random_normal(5, 101, 3);
  const LeastSquaresFitter fitter(b, grid);
  const Eigen::MatrixXd C = fitter.fit_rows(Y);
  const Eigen::MatrixXd phi = b.evaluate(grid);
  const Eigen::MatrixXd normal = (phi.transpose() * phi).ldlt().solve(phi.transpose() * Y.transpose()).transpose();
  CHECK(testing::max_abs(C - normal) < 1e-9);
}
