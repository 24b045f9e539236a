#include <doctest.h>

#include "helpers.hpp"
#include "mvfmm/error.hpp"
#include "mvfmm/sim.hpp"
#include "mvfmm/stats.hpp"
#include "mvfmm/unstructured.hpp"

using namespace mvfmm;
using namespace mvfmm::sim;

namespace {

ScenarioConfig light(int scenario) {
  ScenarioConfig c;
  c.scenario = scenario;
  c.analysis_size = 30;
  return c;
}

}  // namespace

TEST_CASE("variance profile calibration") {
  const ScenarioConfig c;
  const auto [q, s] = default_variances(c);
  REQUIRE(q.size() == 13);
  CHECK(q.sum() / (q.sum() + s.sum()) == doctest::Approx(0.78).epsilon(1e-12));
  CHECK((q + s).sum() == doctest::Approx(5000.0).epsilon(1e-12));
  const Eigen::VectorXd v = q + s;
  CHECK(v.head(7).sum() / v.sum() >= 0.95);
  for (int k = 1; k < 13; ++k) CHECK(v(k) < v(k - 1));
  CHECK(q.minCoeff() >= 0.0);
}

TEST_CASE("generator basis is orthonormal and truth is consistent") {
  const Truth t = build_truth(light(1));
  const MvFpcBasis& g = t.generator;
  CHECK(g.n_components() == 13);
  CHECK(testing::max_abs(g.eigencoefs * g.gram * g.eigencoefs.transpose() - Eigen::MatrixXd::Identity(13, 13)) < 1e-8);
  CHECK(t.icc == doctest::Approx(0.78).epsilon(1e-12));
  CHECK(t.fixed_effects.rows() == 3);
  CHECK(t.effects[1].size() == 2);
  CHECK(t.effects[1][0].size() == 101);
  CHECK(t.u_coefficients.rows() == 13);
  CHECK(t.u_coefficients.cols() == 60);
  // Scenario 1 shares one basis for both random terms.
  CHECK(t.u_coefficients == t.e_coefficients);
}

TEST_CASE("scenario 2 random terms live on split Fourier and Legendre systems") {
  ScenarioConfig c = light(2);
  c.analysis_size = 80;
  const Truth t = build_truth(c);
  const SplitBasis fourier = split_multivariate_basis(BasisSystem::fourier(13, 200.0), 2);
  const SplitBasis legendre = split_multivariate_basis(BasisSystem::legendre(12, 200.0), 2);
  double worst_u = 0, worst_e = 0;
  for (std::size_t p = 0; p < 2; ++p) {
    const Eigen::MatrixXd phi = t.analysis_layout[p].basis.evaluate(t.grid);
    const Eigen::MatrixXd u = phi * t.u_coefficients.middleCols(static_cast<Eigen::Index>(p) * 80, 80).transpose();
    const Eigen::MatrixXd e = phi * t.e_coefficients.middleCols(static_cast<Eigen::Index>(p) * 80, 80).transpose();
    const Eigen::MatrixXd fu = fourier.evaluate(static_cast<int>(p), t.grid);
    const Eigen::MatrixXd le = legendre.evaluate(static_cast<int>(p), t.grid);
    worst_u = std::max(worst_u, testing::max_abs(u - fu) / testing::max_abs(fu));
    worst_e = std::max(worst_e, testing::max_abs(e - le) / testing::max_abs(le));
  }
  CHECK(worst_u < 1e-3);
  CHECK(worst_e < 1e-3);
  CHECK(t.icc == doctest::Approx(0.78).epsilon(1e-12));
}

TEST_CASE("generated scores have the configured variances") {
  ScenarioConfig c = light(1);
  c.subjects = 5000;
  c.sides = 1;
  c.analysis_size = 4;
  const Truth t = build_truth(c);
  const SimulatedData d = generate_dataset(t, 3);
  const Eigen::MatrixXd cu = (d.u_scores.transpose() * d.u_scores) / 5000.0;
  const Eigen::MatrixXd ce = (d.e_scores.transpose() * d.e_scores) / 5000.0;
  for (int k = 0; k < 13; ++k) {
    // Variance estimate with 5000 draws has relative SD sqrt(2 / 5000) = 0.02.
    CHECK(std::abs(cu(k, k) / t.q(k) - 1.0) < 0.08);
    CHECK(std::abs(ce(k, k) / t.s(k) - 1.0) < 0.08);
    for (int l = 0; l < k; ++l) CHECK(std::abs(cu(k, l)) < 0.08 * std::sqrt(t.q(k) * t.q(l)));
  }
  int female = 0;
  Eigen::VectorXd speed(5000);
  for (int i = 0; i < 5000; ++i) {
    const auto& key = d.data.keys[static_cast<std::size_t>(i)];
    female += d.data.covariates.value(key.subject, key.side, "sex") == 1.0;
    speed(i) = d.data.covariates.value(key.subject, key.side, "speed");
  }
  CHECK(std::abs(female / 5000.0 - 0.39) < 4 * std::sqrt(0.39 * 0.61 / 5000));
  CHECK(std::abs(speed.mean() - 11.0) < 4 * 1.6 / std::sqrt(5000.0));
}

TEST_CASE("datasets are deterministic per replicate") {
  ScenarioConfig c = light(1);
  c.subjects = 20;
  const Truth t = build_truth(c);
  const SimulatedData a = generate_dataset(t, 4), b = generate_dataset(t, 4), other = generate_dataset(t, 5);
  CHECK(a.data.coefficients == b.data.coefficients);
  CHECK(a.data.coefficients != other.data.coefficients);
  CHECK(a.data.rows() == 40);
  CHECK(a.data.keys[0].subject == "S0001");
  CHECK(a.data.keys[1].side == Side::Right);
}

TEST_CASE("fixed-effect ISE") {
  const std::vector<double> grid = uniform_grid(101, 100.0);
  const std::vector<Eigen::VectorXd> zero{Eigen::VectorXd::Zero(101), Eigen::VectorXd::Zero(101)};
  const std::vector<Eigen::VectorXd> two{Eigen::VectorXd::Constant(101, 2.0), Eigen::VectorXd::Constant(101, 2.0)};
  CHECK(fixed_effect_ise(two, zero, grid) == doctest::Approx(2 * 4.0 * 100.0));
  CHECK(fixed_effect_ise(zero, zero, grid) == 0.0);
}

TEST_CASE("configuration validation") {
  ScenarioConfig c;
  c.scenario = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig{};
  c.components = 30;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ScenarioConfig{};
  c.fixed_effects = Eigen::MatrixXd::Zero(2, 13);
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(ScenarioConfig{}.validate());
}

TEST_CASE("ICC estimates centre on the truth without inference") {
  ScenarioConfig c = light(1);
  StudyOptions o;
  o.replicates = 30;
  o.inference = false;
  const StudyResult r = run_study(c, o);
  REQUIRE(r.successes() == 30);
  const auto icc = r.icc_values();
  CHECK(std::abs(mean(icc) - r.true_icc) <= 3.0 * sample_sd(icc) / std::sqrt(30.0));
  for (const auto& rep : r.replicates) CHECK(rep.k_retained == 13);
  CHECK_THROWS_AS(coverage_table({&r}), Error);
  CHECK(ise_csv({&r}).rfind("scenario,replicate,metric,value\n", 0) == 0);
}

TEST_CASE("unstructured ISE shrinks with the number of subjects") {
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {40, 160, 640}) {
    ScenarioConfig c = light(1);
    c.subjects = n;
    c.analysis_size = 20;
    const Truth t = build_truth(c);
    std::vector<double> ise;
    for (int rep = 0; rep < 20; ++rep) {
      const SimulatedData d = generate_dataset(t, rep);
      const FittedModel m = fit_model(d.data, testing::sex_speed_spec());
      const UnstructuredCov u = unstructured_fit(m, d.data, 1);
      ise.push_back(cov_ise(surface(u, SurfaceKind::Q, t.grid), t.q_surface));
    }
    const double med = median(ise);
    CHECK(med < prev);
    prev = med;
  }
}

TEST_CASE("coverage reports from fixed tallies") {
  StudyResult r;
  r.config.scenario = 1;
  r.options.inference = true;
  r.grid = {0.0, 100.0};
  r.dimensions = {"hip"};
  r.replicates.resize(200);
  for (int i = 0; i < 200; ++i) {
    auto& rep = r.replicates[static_cast<std::size_t>(i)];
    rep.ok = true;
    const bool hit = i < 190;
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < kEffects; ++a) {
        rep.pointwise_hit[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)] = {hit, hit};
        rep.simultaneous_hit[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)] = hit;
      }
  }
  CHECK(r.pointwise_coverage(kWald, 0) == doctest::Approx(0.95));
  const auto rows = coverage_table({&r, &r});
  CHECK(rows.size() == 2 * 2 * 2 * 3);
  CHECK(rows[0].estimate == doctest::Approx(0.95));
  CHECK(rows[0].mc_se == doctest::Approx(0.0154).epsilon(0.01));
  const std::string csv = coverage_table_csv(rows);
  CHECK(csv.rfind("method,type,scenario,effect,estimate,mc_se\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
  CHECK(coverage_profile_csv({&r}).rfind("scenario,effect,method,dimension,t,coverage,mc_se\n", 0) == 0);

  for (auto& rep : r.replicates) rep.ok = false;
  CHECK_THROWS_AS(coverage_table({&r}), Error);
  CHECK_THROWS_AS(r.icc_coverage(), Error);
}

TEST_CASE("a small study with inference produces every table") {
  ScenarioConfig c = light(2);
  c.subjects = 60;
  StudyOptions o;
  o.replicates = 3;
  o.bootstrap = 20;
  o.draws = 200;
  const StudyResult r = run_study(c, o);
  REQUIRE(r.successes() == 3);
  const auto profile = r.coverage_profile(kBootstrap, 1);
  CHECK(profile.size() == 202);
  CHECK(profile.minCoeff() >= 0.0);
  CHECK(profile.maxCoeff() <= 1.0);
  for (const auto& rep : r.replicates) {
    CHECK(rep.icc_lower <= rep.icc_upper);
    CHECK(rep.simultaneous_multiplier[kWald][0] > rep.pointwise_multiplier);
  }
  const std::string icc = icc_csv({&r});
  CHECK(std::count(icc.begin(), icc.end(), '\n') == 4);
}
