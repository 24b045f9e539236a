// Invariant sweeps over randomised inputs. Runs standalone:
//   test_properties [doctest options]

#include <doctest.h>

#include <numeric>

#include "../tools/commands.hpp"
#include "helpers.hpp"
#include "mvfmm/ingest.hpp"
#include "mvfmm/inference.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/serialize.hpp"
#include "mvfmm/sim.hpp"
#include "mvfmm/stats.hpp"
#include "mvfmm/unstructured.hpp"
#include "oracles.hpp"

using namespace mvfmm;

namespace {

constexpr int kSweeps = 6;

std::vector<DimensionBasis> random_layout(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(5, 14);
  return {{"hip", make_bspline(size(rng))}, {"knee", make_bspline(size(rng))}};
}

bool is_psd(const Eigen::MatrixXd& m, double rel) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff() >= -rel * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
}

RawCurve curve(const std::string& dim, const std::vector<double>& t, const std::vector<double>& v) {
  RawCurve c{"s", Side::Left, dim, 1, {}};
  for (std::size_t i = 0; i < t.size(); ++i) c.samples.push_back({t[i], v[i]});
  return c;
}

int run_cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("orthonormality") {
  TEST_CASE("split bases over many sizes") {
    for (int K : {1, 3, 7, 13, 21}) {
      const SplitBasis s = split_multivariate_basis(BasisSystem::fourier(K, 200.0), 2);
      const Eigen::VectorXd w = simpson_weights(1001, 100.0);
      const auto grid = uniform_grid(1001, 100.0);
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
      for (int p = 0; p < 2; ++p) {
        const Eigen::MatrixXd v = s.evaluate(p, grid);
        G += v.transpose() * w.asDiagonal() * v;
      }
      CHECK(testing::max_abs(G - Eigen::MatrixXd::Identity(K, K)) < 1e-8);
    }
  }

  TEST_CASE("mv-FPCA eigencoefficients, scores and signs") {
    std::mt19937_64 rng(1);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const auto layout = random_layout(rng);
      const int M = layout[0].basis.size() + layout[1].basis.size();
      const Eigen::Index n = 10 + 7 * sweep;
      const Eigen::MatrixXd coeffs = testing::random_normal(n, M, 100 + sweep) * testing::random_normal(M, M, 200 + sweep);
      MvFpcaOptions opts;
      opts.pve_target = 1.0;
      const MvFpcBasis b = mvfpca_fit(coeffs, layout, opts);
      const int K = b.n_components();
      CHECK(testing::max_abs(b.eigencoefs * b.gram * b.eigencoefs.transpose() - Eigen::MatrixXd::Identity(K, K)) < 1e-8);
      const Eigen::MatrixXd sc = project_scores(b, coeffs, true);
      const Eigen::MatrixXd cov = sc.transpose() * sc / static_cast<double>(n - 1);
      CHECK((cov.diagonal() - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, b.eigenvalues(0)));
      const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
      Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
      corr.diagonal().setZero();
      CHECK(testing::max_abs(corr) < 1e-6);
      for (int k = 0; k < K; ++k) {
        Eigen::Index idx;
        b.eigencoefs.row(k).cwiseAbs().maxCoeff(&idx);
        CHECK(b.eigencoefs(k, idx) > 0);
        if (k) CHECK(b.eigenvalues(k) <= b.eigenvalues(k - 1));
      }
    }
  }
}

TEST_SUITE("psd") {
  TEST_CASE("Gram matrices") {
    for (int size : {4, 9, 25, 80}) {
      const Eigen::MatrixXd G = gram_matrix(make_bspline(size));
      CHECK(G == G.transpose());
      CHECK(is_psd(G, 1e-10));
    }
  }

  TEST_CASE("LMM covariance and model surfaces") {
    std::mt19937_64 rng(2);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const auto study = testing::small_study(20 + 5 * sweep, random_layout(rng), 1.0 + sweep * 0.2, 0.5, 300 + sweep);
      const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
      CHECK(m.icc >= 0.0);
      CHECK(m.icc <= 1.0);
      const auto grid = uniform_grid(26, 100.0);
      for (const CovarianceSurface& s : {reconstruct_q(m, grid), reconstruct_s(m, grid)}) {
        for (int p = 0; p < 2; ++p)
          for (int q = 0; q < 2; ++q) CHECK(testing::max_abs(s.block(p, q) - s.block(q, p).transpose()) < 1e-10);
        CHECK(is_psd(s.stacked(), 1e-8));
      }
      const Eigen::MatrixXd X = m.coding.design(study.data);
      LmmDesign d{study.data.coefficients.col(0), X, study.data.subject_groups()};
      const LmmFit fit = reml_fit(d);
      CHECK(fit.beta_cov == fit.beta_cov.transpose());
      CHECK(is_psd(fit.beta_cov, 1e-10));
      CHECK(fit.q >= 0.0);
      CHECK(fit.s > 0.0);
    }
  }

  TEST_CASE("bootstrap covariances") {
    const auto study = testing::small_study(25, {{"hip", make_bspline(6)}, {"knee", make_bspline(6)}}, 1.0, 0.5, 7);
    const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
    BootstrapOptions o;
    o.replicates = 30;
    const BootstrapResult b = bootstrap_of_subjects(study.data, m, o);
    for (const auto& c : b.covariance) CHECK(is_psd(c, 1e-10));
  }
}

TEST_SUITE("linearity") {
  TEST_CASE("predictions are affine in each continuous covariate") {
    std::mt19937_64 rng(3);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const auto study = testing::small_study(25, random_layout(rng), 1.0, 0.5, 400 + sweep);
      const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
      const auto grid = uniform_grid(51, 100.0);
      const auto slope = effect_function(m, 2, grid);
      std::uniform_real_distribution<double> speed(8.0, 14.0);
      for (double sex : {0.0, 1.0}) {
        const double s0 = speed(rng), delta = speed(rng) - 11.0;
        const auto a = predict_mean(m, {{"sex", sex}, {"speed", s0}}, grid);
        const auto b = predict_mean(m, {{"sex", sex}, {"speed", s0 + delta}}, grid);
        for (std::size_t p = 0; p < 2; ++p) CHECK(testing::max_abs(b[p] - a[p] - delta * slope[p]) < 1e-10);
      }
    }
  }

  TEST_CASE("LMM shift and scale invariance") {
    std::mt19937_64 rng(4);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const auto study = testing::small_study(30, {{"x", BasisSystem::fourier(1, 100.0)}}, 1.0, 0.7, 500 + sweep);
      const DesignCoding coding = DesignCoding::resolve(testing::sex_speed_spec(), study.data);
      LmmDesign d{study.data.coefficients.col(0), coding.design(study.data), study.data.subject_groups()};
      const LmmFit base = reml_fit(d);
      std::uniform_real_distribution<double> u(-10.0, 10.0);
      const double c = u(rng), sigma = std::abs(u(rng)) + 0.5;
      LmmDesign shifted = d;
      shifted.response.array() += c;
      const LmmFit sf = reml_fit(shifted);
      CHECK(std::abs(sf.beta(0) - base.beta(0) - c) < 1e-10 * std::max(1.0, std::abs(c)));
      CHECK(testing::max_abs(sf.beta.tail(2) - base.beta.tail(2)) < 1e-10);
      CHECK(std::abs(sf.q - base.q) < 1e-10 * std::max(1.0, base.q));
      CHECK(std::abs(sf.s - base.s) < 1e-10 * std::max(1.0, base.s));
      LmmDesign scaled = d;
      scaled.response *= sigma;
      const LmmFit sc = reml_fit(scaled);
      CHECK(testing::max_abs(sc.beta - sigma * base.beta) < 1e-10 * sigma * std::max(1.0, testing::max_abs(base.beta)));
      CHECK(std::abs(sc.s / (sigma * sigma * base.s) - 1.0) < 1e-8);
      if (base.lambda > 0) CHECK(std::abs(sc.lambda / base.lambda - 1.0) < 1e-8);
    }
  }

  TEST_CASE("ICC is scale invariant") {
    const auto study = testing::small_study(30, {{"hip", make_bspline(6)}, {"knee", make_bspline(6)}}, 1.0, 0.5, 8);
    const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
    for (double sigma : {0.01, 3.0, 250.0}) {
      FunctionalDataset scaled = study.data;
      scaled.coefficients *= sigma;
      CHECK(std::abs(fit_model(scaled, testing::sex_speed_spec()).icc - m.icc) < 1e-10);
    }
  }
}

TEST_SUITE("determinism-under-parallelism") {
  TEST_CASE("model fit, bootstrap and bands ignore the thread count") {
    const auto study = testing::small_study(30, {{"hip", make_bspline(8)}, {"knee", make_bspline(8)}}, 1.0, 0.5, 9);
    FitOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const FittedModel a = fit_model(study.data, testing::sex_speed_spec(), one);
    const FittedModel b = fit_model(study.data, testing::sex_speed_spec(), many);
    CHECK(a.bstar == b.bstar);
    CHECK(a.qstar == b.qstar);
    BootstrapOptions o;
    o.replicates = 25;
    o.seed = 3;
    o.threads = 1;
    const auto ba = bootstrap_of_subjects(study.data, a, o);
    o.threads = 3;
    const auto bb = bootstrap_of_subjects(study.data, a, o);
    for (std::size_t e = 0; e < ba.covariance.size(); ++e) CHECK(ba.covariance[e] == bb.covariance[e]);
    SimultaneousOptions so;
    so.draws = 1500;
    so.threads = 1;
    const auto grid = uniform_grid(101, 100.0);
    const Band s1 = simultaneous_band(a, 1, grid, ba.covariance[1], so);
    so.threads = 4;
    const Band s4 = simultaneous_band(a, 1, grid, ba.covariance[1], so);
    CHECK(s1.multiplier == s4.multiplier);
  }

  TEST_CASE("simulation study ignores the thread count") {
    sim::ScenarioConfig c;
    c.subjects = 40;
    c.analysis_size = 20;
    sim::StudyOptions o;
    o.replicates = 4;
    o.bootstrap = 10;
    o.draws = 100;
    o.threads = 1;
    const sim::StudyResult a = sim::run_study(c, o);
    o.threads = 3;
    const sim::StudyResult b = sim::run_study(c, o);
    CHECK(sim::coverage_table_csv(sim::coverage_table({&a})) == sim::coverage_table_csv(sim::coverage_table({&b})));
    CHECK(sim::ise_csv({&a}) == sim::ise_csv({&b}));
    CHECK(sim::icc_csv({&a}) == sim::icc_csv({&b}));
    CHECK(sim::coverage_profile_csv({&a}) == sim::coverage_profile_csv({&b}));
  }

  TEST_CASE("CLI reruns give identical files") {
    const std::string data = MVFMM_DATA_DIR;
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "3"}) {
      const auto dir = testing::scratch_dir(std::string("prop_cli_") + threads);
      CHECK(run_cli({"mvfmm", "--threads", threads, "fit", "--curves", data + "/curves.csv", "--covariates",
                     data + "/covariates.csv", "--config", data + "/config.json", "--out", dir.string()}) == 0);
      CHECK(run_cli({"mvfmm", "--threads", threads, "bands", "--model", (dir / "model.json").string(), "--curves",
                     data + "/curves.csv", "--covariates", data + "/covariates.csv", "--config",
                     data + "/config.json", "--method", "bootstrap", "--B", "20", "--R", "300", "--out",
                     dir.string()}) == 0);
      outputs.push_back(io::read_file(dir / "effects.csv") + io::read_file(dir / "surfaces.csv") +
                        io::read_file(dir / "bands.csv"));
    }
    CHECK(outputs[0] == outputs[1]);
  }
}

TEST_SUITE("serialization") {
  TEST_CASE("models and configurations survive text round trips") {
    std::mt19937_64 rng(5);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const auto study = testing::small_study(15 + sweep, random_layout(rng), 1.0, 0.5, 600 + sweep);
      const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
      const std::string text = to_json(m).dump();
      const FittedModel back = fitted_model_from_json(Json::parse(text));
      CHECK(to_json(back).dump() == text);
      const auto grid = uniform_grid(101, 100.0);
      CHECK(cli::effects_csv(back, grid) == cli::effects_csv(m, grid));
    }
    sim::ScenarioConfig c;
    c.seed = 77;
    c.fixed_effects = testing::random_normal(3, 13, 1);
    CHECK(to_json(scenario_from_json(Json::parse(to_json(c).dump()))).dump() == to_json(c).dump());
  }

  TEST_CASE("CSV writers round-trip through the reader") {
    const auto study = testing::small_study(15, {{"hip", make_bspline(6)}, {"knee", make_bspline(6)}}, 1.0, 0.5, 10);
    const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
    const auto grid = uniform_grid(101, 100.0);
    const io::CsvTable t = io::parse_csv(cli::effects_csv(m, grid));
    const auto beta1 = effect_function(m, 1, grid);
    std::size_t checked = 0;
    for (const auto& row : t.rows) {
      if (row[0] != m.coding.column_names[1] || row[1] != "knee") continue;
      const auto i = static_cast<Eigen::Index>(io::parse_double(row[2]));
      CHECK(io::parse_double(row[3]) == beta1[1](i));
      ++checked;
    }
    CHECK(checked == 101);
  }
}

TEST_SUITE("ingest") {
  TEST_CASE("time normalisation is idempotent") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      std::vector<double> t{0.3}, v{0.0};
      for (int i = 0; i < 50; ++i) {
        t.push_back(t.back() + 0.01 + u(rng));
        v.push_back(u(rng));
      }
      const RawCurve once = time_normalize(curve("hip", t, v));
      const RawCurve twice = time_normalize(once);
      for (std::size_t i = 0; i < once.samples.size(); ++i) CHECK(twice.samples[i].t == once.samples[i].t);
    }
  }

  TEST_CASE("registration applies one warp to every dimension") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> peak(10.0, 90.0);
    const auto grid = uniform_grid(101, 100.0);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const double tau = std::round(peak(rng)), target = std::round(peak(rng));
      std::vector<double> tri, ramp, ramp2;
      for (double t : grid) {
        tri.push_back(t <= tau ? t / tau : (100 - t) / (100 - tau));
        ramp.push_back(t);
        ramp2.push_back(t);
      }
      const auto out = landmark_register({curve("knee", grid, tri), curve("hip", grid, ramp), curve("ankle", grid, ramp2)},
                                         "knee", target);
      CHECK(landmark_time(out[0]) == target);
      // A ramp registers to the inverse warp itself, identically per dimension.
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(out[1].samples[i].value == out[2].samples[i].value);
      const LandmarkWarp h{tau, target, 100.0};
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(out[1].samples[i].value == doctest::Approx(h.inverse(grid[i])).epsilon(1e-12));
      const auto same = landmark_register({curve("knee", grid, tri)}, "knee", tau);
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(same[0].samples[i].value - tri[i]) < 1e-15);
    }
  }

  TEST_CASE("B-splines reproduce polynomials of degree below the order") {
    const auto grid = uniform_grid(101, 100.0);
    for (int order : {2, 3, 4, 5})
      for (int size : {order, order + 3, 30}) {
        const BasisSystem b = make_bspline(size, order);
        std::vector<double> poly;
        for (double t : grid) {
          double v = 0, x = t / 100.0;
          for (int d = 0; d < order; ++d) v += (d + 1) * std::pow(x, d);
          poly.push_back(v);
        }
        const Eigen::VectorXd fit = b.evaluate(grid) * fit_coefficients(poly, grid, b);
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(fit(static_cast<Eigen::Index>(i)) - poly[i]) < 1e-10);
      }
  }
}

TEST_SUITE("inference") {
  TEST_CASE("band arithmetic and nested-grid monotonicity") {
    const auto study = testing::small_study(25, {{"hip", make_bspline(8)}, {"knee", make_bspline(8)}}, 1.0, 0.5, 11);
    const FittedModel m = fit_model(study.data, testing::sex_speed_spec());
    for (int a = 0; a < 3; ++a) {
      const Eigen::MatrixXd cov = wald_covariance(m, a);
      SimultaneousOptions so;
      so.draws = 1000;
      so.seed = 10 + a;
      double prev = 0;
      for (int pts : {2, 3, 5, 9, 17, 33, 65, 129}) {
        const Band b = simultaneous_band(m, a, uniform_grid(pts, 100.0), cov, so);
        CHECK(b.multiplier >= prev);
        prev = b.multiplier;
        for (std::size_t p = 0; p < 2; ++p) {
          CHECK(((b.upper[p] - b.point[p]) - b.multiplier * b.se[p]).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.upper[p].cwiseAbs().maxCoeff()));
          CHECK(((b.point[p] - b.lower[p]) - b.multiplier * b.se[p]).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.upper[p].cwiseAbs().maxCoeff()));
        }
      }
    }
  }

  TEST_CASE("percentile intervals commute with increasing maps") {
    std::mt19937_64 rng(12);
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
      const Eigen::VectorXd raw = testing::random_normal(20 + 37 * sweep, 1, 700 + sweep).col(0);
      std::vector<double> xs(raw.data(), raw.data() + raw.size()), ex;
      for (double v : xs) ex.push_back(std::exp(v));
      const auto [a, b] = icc_interval(xs, 0.9);
      const auto [c, d] = icc_interval(ex, 0.9);
      CHECK(c == std::exp(a));
      CHECK(d == std::exp(b));
      CHECK(a == oracle::ceiling_order_statistic(xs, 0.05));
    }
  }
}

TEST_SUITE("unstructured") {
  TEST_CASE("efficient solver equals the dense design on random small instances") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> nsub(1, 6), msize(1, 4), twice(0, 1);
    for (int sweep = 0; sweep < 40; ++sweep) {
      const int N = nsub(rng), M = msize(rng);
      std::vector<int> groups;
      for (int i = 0; i < N; ++i) {
        groups.push_back(i);
        if (i == 0 || twice(rng)) groups.push_back(i);
      }
      const Eigen::MatrixXd y = testing::random_normal(static_cast<Eigen::Index>(groups.size()), M, 800 + sweep);
      const auto est = unstructured_fit(y, groups, {{"x", BasisSystem::fourier(M, 100.0)}}, 1);
      const auto ref = oracle::dense_kronecker_ols(y, groups);
      CHECK(testing::max_abs(est.q - ref.q) < 1e-10 * std::max(1.0, testing::max_abs(ref.q)));
      CHECK(testing::max_abs(est.s - ref.s) < 1e-10 * std::max(1.0, testing::max_abs(ref.s)));
    }
  }
}
