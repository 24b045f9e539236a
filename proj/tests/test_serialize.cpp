#include <doctest.h>

#include "helpers.hpp"
#include "mvfmm/error.hpp"
#include "mvfmm/inference.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/serialize.hpp"

using namespace mvfmm;

namespace {

Json reparse(const Json& j) { return Json::parse(j.dump()); }

FittedModel small_model() {
  const auto study = testing::small_study(20, {{"hip", make_bspline(7)}, {"knee", BasisSystem::fourier(5, 100.0)}}, 1.0, 0.5, 9);
  return fit_model(study.data, testing::sex_speed_spec());
}

}  // namespace

TEST_CASE("matrices round-trip exactly through text") {
  Eigen::MatrixXd m = testing::random_normal(4, 3, 1);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  CHECK(matrix_from_json(reparse(to_json(m))) == m);
  const Eigen::VectorXd v = testing::random_normal(6, 1, 2).col(0);
  CHECK(vector_from_json(reparse(to_json(v))) == v);
  CHECK(matrix_from_json(reparse(to_json(Eigen::MatrixXd(0, 0)))).size() == 0);
  CHECK_THROWS_AS(matrix_from_json(Json::parse("[[1, 2], [3]]")), Error);
  for (double x : {0.1, 1.0 / 3.0, 2.5e-17, -123456.789})
    CHECK(io::parse_double(io::format_double(x)) == x);
}

TEST_CASE("basis systems and layouts round-trip") {
  for (const BasisSystem& b : {make_bspline(12, 4, 100.0), make_bspline(9, 3, 50.0), BasisSystem::fourier(7, 200.0),
                               BasisSystem::legendre(5, 100.0)})
    CHECK(basis_from_json(reparse(to_json(b))) == b);
  const std::vector<DimensionBasis> layout{{"hip", make_bspline(10)}, {"knee", BasisSystem::fourier(3, 100.0)}};
  CHECK(layout_from_json(reparse(to_json(layout))) == layout);
}

TEST_CASE("fitted model round-trips and reproduces its outputs bit for bit") {
  FittedModel m = small_model();
  m.boot_cov = std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Identity(m.n_components(), m.n_components())};
  const FittedModel back = fitted_model_from_json(reparse(to_json(m)));
  CHECK(back.basis.eigencoefs == m.basis.eigencoefs);
  CHECK(back.basis.gram == m.basis.gram);
  CHECK(back.bstar == m.bstar);
  CHECK(back.wald_var == m.wald_var);
  CHECK(back.qstar == m.qstar);
  CHECK(back.mean_residual == m.mean_residual);
  CHECK(back.icc == m.icc);
  CHECK(back.coding.column_names == m.coding.column_names);
  CHECK(back.coding.terms[1].center == m.coding.terms[1].center);
  REQUIRE(back.boot_cov.has_value());
  CHECK(back.boot_cov->front() == m.boot_cov->front());
  REQUIRE(back.reports.size() == m.reports.size());
  CHECK(back.reports[0].lambda == m.reports[0].lambda);
  const auto grid = uniform_grid(101, 100.0);
  for (int a = 0; a < m.n_effects(); ++a) {
    const auto x = effect_function(m, a, grid), y = effect_function(back, a, grid);
    for (std::size_t p = 0; p < x.size(); ++p) CHECK(x[p] == y[p]);
  }
  CHECK(to_json(back).dump() == to_json(m).dump());
}

TEST_CASE("model loading rejects bad documents") {
  const FittedModel m = small_model();
  Json j = to_json(m);
  j["schema_version"] = 99;
  CHECK_THROWS_AS(fitted_model_from_json(j), Error);
  Json k = to_json(m);
  k["bstar"] = to_json(Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)));
  CHECK_THROWS_AS(fitted_model_from_json(k), Error);
  try {
    fitted_model_from_json(Json::parse("{\"schema_version\": 1}"));
    FAIL("empty model accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("scenario configuration round-trips and rejects unknown keys") {
  sim::ScenarioConfig c;
  c.scenario = 2;
  c.subjects = 99;
  c.q = Eigen::VectorXd::Constant(13, 2.0);
  const sim::ScenarioConfig back = scenario_from_json(reparse(to_json(c)));
  CHECK(back.scenario == 2);
  CHECK(back.subjects == 99);
  CHECK(back.seed == c.seed);
  REQUIRE(back.q.has_value());
  CHECK(*back.q == *c.q);
  CHECK(to_json(back).dump() == to_json(c).dump());

  Json j = to_json(c);
  j["subjcts"] = 10;
  CHECK_THROWS_AS(scenario_from_json(j), Error);
  Json bad = to_json(c);
  bad["scenario"] = 7;
  CHECK_THROWS_AS(scenario_from_json(bad), Error);
  CHECK(scenario_from_json(Json::parse("{\"subjects\": 50}")).subjects == 50);
}

TEST_CASE("model spec and bootstrap summaries") {
  const ModelSpec spec = testing::sex_speed_spec();
  const ModelSpec back = model_spec_from_json(reparse(to_json(spec)));
  REQUIRE(back.covariates.size() == 2);
  CHECK(back.covariates[0].kind == CovariateKind::Categorical);
  CHECK(back.covariates[0].reference == 0.0);
  CHECK(back.covariates[1].center);

  BootstrapResult boot;
  boot.replicates = 2;
  boot.seed = 5;
  boot.icc_samples = Eigen::Vector2d(0.7, 0.8);
  boot.covariance = {Eigen::MatrixXd::Identity(2, 2)};
  const Json j = to_json(boot);
  CHECK(j.at("replicates") == 2);
  CHECK(j.at("seed") == 5);
}

TEST_CASE("CSV reader handles quotes and reports columns") {
  const io::CsvTable t = io::parse_csv("a,\"b,c\",d\n1,\"x \"\"y\"\"\",3\n\n4,5,6\n");
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "b,c");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x \"y\"");
  CHECK(t.column("d") == 2);
  CHECK(t.column("zz") == -1);
  CHECK_THROWS_AS(io::parse_double("1.5x"), Error);
  CHECK(io::parse_int("42") == 42);
}
