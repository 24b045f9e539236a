#include "mvfmm/sim.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "mvfmm/error.hpp"
#include "mvfmm/inference.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/parallel.hpp"
#include "mvfmm/stats.hpp"
#include "mvfmm/unstructured.hpp"

namespace mvfmm::sim {

namespace {
constexpr const char* kModule = "sim";
constexpr std::uint64_t kGenerateTag = 0x9e4e;
constexpr std::uint64_t kInferenceTag = 0x1f3c;

// Smooth coefficient covariance of the generator: exponential decay along
// the spline index, constant cross-dimension correlation.
constexpr double kCorrelationLength = 3.0;
constexpr double kCrossCorrelation = 0.5;

double bump(double t, double centre, double width) {
  const double z = (t - centre) / width;
  return std::exp(-z * z);
}

double sigmoid(double t, double centre, double width) { return 1.0 / (1.0 + std::exp(-(t - centre) / width)); }

// Gait-like shapes on [0, 100]; dimension 0 hip-like, dimension 1 knee-like.
double default_effect(int effect, int dimension, double t) {
  const bool hip = dimension % 2 == 0;
  switch (effect) {
    case 0:
      return hip ? 12.0 + 20.0 * std::cos(2.0 * std::numbers::pi * (t - 8.0) / 100.0)
                 : 5.0 + 15.0 * bump(t, 15.0, 9.0) + 55.0 * bump(t, 72.0, 13.0);
    case 1:
      return hip ? 1.5 * bump(t, 60.0, 14.0) - 0.5 : 1.8 * bump(t, 75.0, 12.0) - 1.2 * sigmoid(t, 35.0, 6.0);
    default:
      return hip ? 0.8 * std::sin(2.0 * std::numbers::pi * t / 100.0) + 0.4
                 : 1.2 * bump(t, 18.0, 10.0) + 0.9 * bump(t, 70.0, 12.0);
  }
}

std::vector<double> make_grid(const ScenarioConfig& c) { return uniform_grid(c.grid_points, c.domain_end); }

// |grid| * P x K matrix of per-dimension values (dimension-major).
CovarianceSurface surface_from_values(const Eigen::MatrixXd& phi, const Eigen::VectorXd& weights,
                                      const std::vector<double>& grid, const std::vector<std::string>& dims) {
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd full = phi * weights.asDiagonal() * phi.transpose();
  full = 0.5 * (full + full.transpose());
  CovarianceSurface out;
  out.grid = grid;
  out.dimensions = dims;
  const int P = static_cast<int>(dims.size());
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) out.blocks.push_back(full.block(p * g, q * g, g, g));
  return out;
}

std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%04d", i + 1);
  return buf;
}
}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, kModule, m); };
  if (scenario != 1 && scenario != 2) fail("scenario must be 1 or 2");
  if (subjects < 2) fail("need at least 2 subjects");
  if (sides < 1 || sides > 2) fail("sides must be 1 or 2");
  if (dimensions.empty()) fail("need at least one dimension");
  if (components < 1) fail("need at least one component");
  if (components > generator_size * static_cast<int>(dimensions.size()))
    fail("more components than generator basis functions");
  if (generator_size < 4 || analysis_size < 4) fail("basis sizes must be at least 4");
  if (grid_points < analysis_size) fail("grid has fewer points than analysis basis functions");
  if (!(total_variance > 0) || !(decay > 0) || !(icc >= 0 && icc <= 1)) fail("invalid variance profile");
  if (!(sex_probability >= 0 && sex_probability <= 1)) fail("sex probability outside [0, 1]");
  if (!(speed_sd > 0)) fail("speed sd must be positive");
  if (!(pve > 0 && pve <= 1)) fail("pve must lie in (0, 1]");
  if (fixed_effects && (fixed_effects->rows() != 3 || fixed_effects->cols() != components))
    fail("fixed_effects must be 3 x components");
  if (q && (q->size() != components || q->minCoeff() < 0)) fail("q must hold components non-negative values");
  if (s && (s->size() != components || s->minCoeff() < 0)) fail("s must hold components non-negative values");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> default_variances(const ScenarioConfig& c) {
  const int K = c.components;
  Eigen::VectorXd v(K);
  double norm = 0;
  for (int k = 0; k < K; ++k) norm += std::pow(c.decay, k);
  for (int k = 0; k < K; ++k) v[k] = c.total_variance * std::pow(c.decay, k) / norm;
  return {c.icc * v, (1.0 - c.icc) * v};
}

MvFpcBasis generator_basis(const ScenarioConfig& c) {
  const int P = static_cast<int>(c.dimensions.size());
  const int G = c.generator_size;
  MvFpcBasis out;
  for (const auto& d : c.dimensions) out.layout.push_back({d, make_bspline(G, 4, c.domain_end)});
  Eigen::MatrixXd cov(P * G, P * G);
  for (int p = 0; p < P; ++p)
    for (int m = 0; m < G; ++m)
      for (int p2 = 0; p2 < P; ++p2)
        for (int m2 = 0; m2 < G; ++m2) {
          const double sp = 1.0 + 0.4 * p, sp2 = 1.0 + 0.4 * p2;
          cov(p * G + m, p2 * G + m2) = sp * sp2 * (p == p2 ? 1.0 : kCrossCorrelation) *
                                        std::exp(-std::abs(m - m2) / kCorrelationLength);
        }
  out.gram = block_gram(out.layout);
  auto [values, coefs] = metric_eigen(cov, out.gram);
  if (values.size() < c.components)
    throw Error(ErrorKind::Config, kModule, "generator covariance has too few non-negligible eigenvalues");
  out.mean = Eigen::VectorXd::Zero(P * G);
  out.all_eigenvalues = values;
  out.eigenvalues = values.head(c.components);
  out.eigencoefs = coefs.topRows(c.components);
  out.pve_target = 1.0;
  return out;
}

Truth build_truth(const ScenarioConfig& config) {
  config.validate();
  Truth t;
  t.config = config;
  t.grid = make_grid(config);
  const int P = static_cast<int>(config.dimensions.size());
  const int K = config.components;
  const auto g = static_cast<Eigen::Index>(t.grid.size());
  for (const auto& d : config.dimensions) t.analysis_layout.push_back({d, make_bspline(config.analysis_size, 4, config.domain_end)});
  t.generator = generator_basis(config);

  std::vector<Eigen::MatrixXd> gen_on_grid;  // per dimension |grid| x K
  Eigen::MatrixXd gen_stacked(P * g, K);
  for (int p = 0; p < P; ++p) {
    gen_on_grid.push_back(t.generator.component_on_grid(static_cast<std::size_t>(p), t.grid));
    gen_stacked.middleRows(p * g, g) = gen_on_grid.back();
  }

  if (config.fixed_effects) {
    t.fixed_effects = *config.fixed_effects;
  } else {
    // Project the built-in shapes onto the generator FPC span.
    t.fixed_effects.resize(3, K);
    for (int a = 0; a < 3; ++a) {
      Eigen::VectorXd theta(t.generator.total_size());
      for (int p = 0; p < P; ++p) {
        const auto& b = t.generator.layout[static_cast<std::size_t>(p)].basis;
        const LeastSquaresFitter fitter(b, t.grid);
        Eigen::VectorXd values(g);
        for (Eigen::Index i = 0; i < g; ++i) values[i] = default_effect(a, p, t.grid[static_cast<std::size_t>(i)]);
        theta.segment(t.generator.offset(static_cast<std::size_t>(p)), b.size()) = fitter.fit(values);
      }
      t.fixed_effects.row(a) = (t.generator.eigencoefs * (t.generator.gram * theta)).transpose();
    }
  }
  auto [qd, sd] = default_variances(config);
  t.q = config.q.value_or(qd);
  t.s = config.s.value_or(sd);

  // Least squares is linear, so fitting each generating function once gives
  // the first-stage coefficients of any curve built from them.
  std::vector<LeastSquaresFitter> fitters;
  for (const auto& d : t.analysis_layout) fitters.emplace_back(d.basis, t.grid);
  const int M = config.analysis_size * P;
  auto to_analysis = [&](const Eigen::MatrixXd& stacked) {
    Eigen::MatrixXd out(stacked.cols(), M);
    for (int p = 0; p < P; ++p)
      out.middleCols(p * config.analysis_size, config.analysis_size) =
          fitters[static_cast<std::size_t>(p)].fit_rows(stacked.middleRows(p * g, g).transpose());
    return out;
  };

  Eigen::MatrixXd effects_stacked = gen_stacked * t.fixed_effects.transpose();  // P g x 3
  for (int a = 0; a < 3; ++a)
    for (int p = 0; p < P; ++p) t.effects[static_cast<std::size_t>(a)].push_back(effects_stacked.col(a).segment(p * g, g));
  t.effect_coefficients = to_analysis(effects_stacked);

  Eigen::MatrixXd u_stacked, e_stacked;
  if (config.scenario == 1) {
    u_stacked = gen_stacked;
    e_stacked = gen_stacked;
  } else {
    const double span = P * config.domain_end;
    const SplitBasis fourier = split_multivariate_basis(BasisSystem::fourier(K, span), P);
    const SplitBasis legendre = split_multivariate_basis(BasisSystem::legendre(K - 1, span), P);
    u_stacked.resize(P * g, K);
    e_stacked.resize(P * g, K);
    for (int p = 0; p < P; ++p) {
      u_stacked.middleRows(p * g, g) = fourier.evaluate(p, t.grid);
      e_stacked.middleRows(p * g, g) = legendre.evaluate(p, t.grid);
    }
  }
  t.u_coefficients = to_analysis(u_stacked);
  t.e_coefficients = to_analysis(e_stacked);
  t.q_surface = surface_from_values(u_stacked, t.q, t.grid, config.dimensions);
  t.s_surface = surface_from_values(e_stacked, t.s, t.grid, config.dimensions);
  t.icc = icc(t.q, t.s);
  return t;
}

SimulatedData generate_dataset(const Truth& truth, int replicate) {
  const ScenarioConfig& c = truth.config;
  const int N = c.subjects;
  const int K = c.components;
  auto rng = make_stream(c.seed, static_cast<std::uint64_t>(replicate), kGenerateTag);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution female(c.sex_probability);

  SimulatedData out;
  out.u_scores.resize(N, K);
  out.e_scores.resize(N * c.sides, K);
  Eigen::VectorXd sex(N), speed(N);
  for (int i = 0; i < N; ++i) {
    sex[i] = female(rng) ? 1.0 : 0.0;
    speed[i] = c.speed_mean + c.speed_sd * normal(rng);
    for (int k = 0; k < K; ++k) out.u_scores(i, k) = std::sqrt(truth.q[k]) * normal(rng);
    for (int j = 0; j < c.sides; ++j)
      for (int k = 0; k < K; ++k) out.e_scores(i * c.sides + j, k) = std::sqrt(truth.s[k]) * normal(rng);
  }
  const double speed_bar = speed.mean();

  FunctionalDataset& d = out.data;
  d.layout = truth.analysis_layout;
  d.covariates = CovariateTable({"sex", "speed"});
  d.coefficients.resize(N * c.sides, truth.effect_coefficients.cols());
  for (int i = 0; i < N; ++i) {
    const std::string name = subject_name(i);
    d.covariates.set(name, std::nullopt, {sex[i], speed[i]});
    const Eigen::RowVectorXd mean_row = truth.effect_coefficients.row(0) + sex[i] * truth.effect_coefficients.row(1) +
                                        (speed[i] - speed_bar) * truth.effect_coefficients.row(2);
    const Eigen::RowVectorXd u_row = out.u_scores.row(i) * truth.u_coefficients;
    for (int j = 0; j < c.sides; ++j) {
      const int r = i * c.sides + j;
      d.coefficients.row(r) = mean_row + u_row + out.e_scores.row(r) * truth.e_coefficients;
      d.keys.push_back({name, j == 0 ? Side::Left : Side::Right, -1});
    }
  }
  return out;
}

double fixed_effect_ise(const std::vector<Eigen::VectorXd>& estimate, const std::vector<Eigen::VectorXd>& truth,
                        const std::vector<double>& grid) {
  if (estimate.size() != truth.size()) throw Error(ErrorKind::Shape, kModule, "dimension counts differ");
  double total = 0;
  for (std::size_t p = 0; p < estimate.size(); ++p) {
    if (estimate[p].size() != static_cast<Eigen::Index>(grid.size()) || truth[p].size() != estimate[p].size())
      throw Error(ErrorKind::Shape, kModule, "curve lengths differ from the grid");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double d0 = estimate[p][ii] - truth[p][ii];
      const double d1 = estimate[p][ii + 1] - truth[p][ii + 1];
      total += 0.5 * (grid[i + 1] - grid[i]) * (d0 * d0 + d1 * d1);
    }
  }
  return total;
}

ReplicateResult run_replicate(const Truth& truth, const StudyOptions& options, int replicate) {
  ReplicateResult r;
  const ScenarioConfig& c = truth.config;
  try {
    const SimulatedData sim = generate_dataset(truth, replicate);
    ModelSpec spec;
    spec.covariates.push_back({"sex", CovariateKind::Categorical, false, 0.0});
    spec.covariates.push_back({"speed", CovariateKind::Continuous, true, std::nullopt});
    FitOptions fit_options;
    fit_options.fpca.pve_target = c.pve;
    fit_options.threads = 1;
    const FittedModel model = fit_model(sim.data, spec, fit_options);
    r.k_retained = model.n_components();
    r.icc = model.icc;

    std::array<std::vector<Eigen::VectorXd>, kEffects> point;
    for (int a = 0; a < kEffects; ++a) {
      point[static_cast<std::size_t>(a)] = effect_function(model, a, truth.grid);
      r.ise_beta[static_cast<std::size_t>(a)] =
          fixed_effect_ise(point[static_cast<std::size_t>(a)], truth.effects[static_cast<std::size_t>(a)], truth.grid);
    }
    r.ise_q_model = cov_ise(reconstruct_q(model, truth.grid), truth.q_surface);
    r.ise_s_model = cov_ise(reconstruct_s(model, truth.grid), truth.s_surface);
    const UnstructuredCov un = unstructured_fit(model, sim.data, 1);
    r.ise_q_unstructured = cov_ise(surface(un, SurfaceKind::Q, truth.grid), truth.q_surface);
    r.ise_s_unstructured = cov_ise(surface(un, SurfaceKind::S, truth.grid), truth.s_surface);

    if (options.inference) {
      auto seeds = make_stream(c.seed, static_cast<std::uint64_t>(replicate), kInferenceTag);
      const std::uint64_t boot_seed = seeds();
      std::array<std::array<std::uint64_t, kEffects>, 2> draw_seeds{};
      for (auto& m : draw_seeds)
        for (auto& s : m) s = seeds();

      BootstrapOptions bo;
      bo.replicates = options.bootstrap;
      bo.seed = boot_seed;
      bo.threads = 1;
      const BootstrapResult boot = bootstrap_of_subjects(sim.data, model, bo);
      const auto interval = icc_interval(
          std::span<const double>(boot.icc_samples.data(), static_cast<std::size_t>(boot.icc_samples.size())),
          options.level);
      r.icc_lower = interval.first;
      r.icc_upper = interval.second;
      r.icc_covered = interval.first <= truth.icc && truth.icc <= interval.second;

      for (int method = 0; method < 2; ++method)
        for (int a = 0; a < kEffects; ++a) {
          const Eigen::MatrixXd cov =
              method == kWald ? wald_covariance(model, a) : boot.covariance[static_cast<std::size_t>(a)];
          const Band pw = pointwise_band(model, a, truth.grid, cov, options.level,
                                         method == kWald ? BandKind::PointwiseWald : BandKind::PointwiseBoot);
          SimultaneousOptions so;
          so.draws = options.draws;
          so.level = options.level;
          so.seed = draw_seeds[static_cast<std::size_t>(method)][static_cast<std::size_t>(a)];
          so.threads = 1;
          const Band sb = simultaneous_band(model, a, truth.grid, cov, so);
          r.pointwise_multiplier = pw.multiplier;
          r.simultaneous_multiplier[static_cast<std::size_t>(method)][static_cast<std::size_t>(a)] = sb.multiplier;

          const auto& tr = truth.effects[static_cast<std::size_t>(a)];
          auto& hits = r.pointwise_hit[static_cast<std::size_t>(method)][static_cast<std::size_t>(a)];
          hits.clear();
          bool all = true;
          for (std::size_t p = 0; p < tr.size(); ++p)
            for (Eigen::Index i = 0; i < tr[p].size(); ++i) {
              hits.push_back(pw.lower[p][i] <= tr[p][i] && tr[p][i] <= pw.upper[p][i]);
              all = all && sb.lower[p][i] <= tr[p][i] && tr[p][i] <= sb.upper[p][i];
            }
          r.simultaneous_hit[static_cast<std::size_t>(method)][static_cast<std::size_t>(a)] = all;
        }
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

StudyResult run_study(const ScenarioConfig& config, const StudyOptions& options) {
  if (options.replicates < 2) throw Error(ErrorKind::Config, kModule, "need at least 2 replicates");
  if (options.inference && (options.bootstrap < 2 || options.draws < 1))
    throw Error(ErrorKind::Config, kModule, "bootstrap needs B >= 2 and at least one draw");
  const Truth truth = build_truth(config);
  StudyResult out;
  out.config = config;
  out.options = options;
  out.grid = truth.grid;
  out.dimensions = config.dimensions;
  out.true_icc = truth.icc;
  out.replicates.resize(static_cast<std::size_t>(options.replicates));
#pragma omp parallel for num_threads(resolve_threads(options.threads)) schedule(dynamic)
  for (int rep = 0; rep < options.replicates; ++rep)
    out.replicates[static_cast<std::size_t>(rep)] = run_replicate(truth, options, rep);
  return out;
}

int StudyResult::successes() const {
  int n = 0;
  for (const auto& r : replicates) n += r.ok;
  return n;
}

Eigen::VectorXd StudyResult::coverage_profile(int method, int effect) const {
  const auto size = static_cast<Eigen::Index>(grid.size() * dimensions.size());
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(size);
  int n = 0;
  for (const auto& r : replicates) {
    if (!r.ok) continue;
    const auto& h = r.pointwise_hit[static_cast<std::size_t>(method)][static_cast<std::size_t>(effect)];
    if (static_cast<Eigen::Index>(h.size()) != size) throw Error(ErrorKind::Inference, kModule, "no coverage tallies");
    for (Eigen::Index i = 0; i < size; ++i) hits[i] += h[static_cast<std::size_t>(i)];
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::Inference, kModule, "no successful replicates");
  return hits / n;
}

double StudyResult::pointwise_coverage(int method, int effect) const { return coverage_profile(method, effect).mean(); }

double StudyResult::simultaneous_coverage(int method, int effect) const {
  int n = 0, hit = 0;
  for (const auto& r : replicates) {
    if (!r.ok) continue;
    ++n;
    hit += r.simultaneous_hit[static_cast<std::size_t>(method)][static_cast<std::size_t>(effect)];
  }
  if (n == 0) throw Error(ErrorKind::Inference, kModule, "no successful replicates");
  return static_cast<double>(hit) / n;
}

double StudyResult::icc_coverage() const {
  int n = 0, hit = 0;
  for (const auto& r : replicates) {
    if (!r.ok) continue;
    ++n;
    hit += r.icc_covered;
  }
  if (n == 0) throw Error(ErrorKind::Inference, kModule, "no successful replicates");
  return static_cast<double>(hit) / n;
}

std::vector<double> StudyResult::metric(double ReplicateResult::*field) const {
  std::vector<double> out;
  for (const auto& r : replicates)
    if (r.ok) out.push_back(r.*field);
  return out;
}

std::vector<double> StudyResult::icc_values() const { return metric(&ReplicateResult::icc); }

std::vector<double> StudyResult::ise_beta(int effect) const {
  std::vector<double> out;
  for (const auto& r : replicates)
    if (r.ok) out.push_back(r.ise_beta[static_cast<std::size_t>(effect)]);
  return out;
}

namespace {
const char* method_name(int m) { return m == kWald ? "wald" : "bootstrap"; }

void require_results(const std::vector<const StudyResult*>& studies, bool need_inference) {
  for (const auto* s : studies) {
    if (s->successes() == 0)
      throw Error(ErrorKind::Inference, kModule,
                  "scenario " + std::to_string(s->config.scenario) + ": no replicate succeeded");
    if (need_inference && !s->options.inference)
      throw Error(ErrorKind::Config, kModule, "coverage needs a study run with inference");
  }
}
}  // namespace

std::vector<CoverageRow> coverage_table(const std::vector<const StudyResult*>& studies) {
  require_results(studies, true);
  std::vector<CoverageRow> rows;
  for (int m = 0; m < 2; ++m)
    for (const char* type : {"pointwise", "simultaneous"})
      for (const auto* s : studies)
        for (int a = 0; a < kEffects; ++a) {
          const double est = std::string(type) == "pointwise" ? s->pointwise_coverage(m, a)
                                                              : s->simultaneous_coverage(m, a);
          rows.push_back({method_name(m), type, s->config.scenario, a, est, mc_se(est, s->successes())});
        }
  return rows;
}

std::string coverage_table_csv(const std::vector<CoverageRow>& rows) {
  std::ostringstream out;
  out << "method,type,scenario,effect,estimate,mc_se\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.type << ',' << r.scenario << ",beta" << r.effect << ','
        << io::format_double(r.estimate) << ',' << io::format_double(r.mc_se) << '\n';
  return out.str();
}

std::string ise_csv(const std::vector<const StudyResult*>& studies) {
  require_results(studies, false);
  std::ostringstream out;
  out << "scenario,replicate,metric,value\n";
  for (const auto* s : studies)
    for (std::size_t i = 0; i < s->replicates.size(); ++i) {
      const auto& r = s->replicates[i];
      if (!r.ok) continue;
      auto row = [&](const std::string& name, double v) {
        out << s->config.scenario << ',' << i << ',' << name << ',' << io::format_double(v) << '\n';
      };
      for (int a = 0; a < kEffects; ++a) row("beta" + std::to_string(a), r.ise_beta[static_cast<std::size_t>(a)]);
      row("Q_model", r.ise_q_model);
      row("S_model", r.ise_s_model);
      row("Q_unstructured", r.ise_q_unstructured);
      row("S_unstructured", r.ise_s_unstructured);
    }
  return out.str();
}

std::string icc_csv(const std::vector<const StudyResult*>& studies) {
  require_results(studies, false);
  std::ostringstream out;
  out << "scenario,replicate,icc,lower,upper,covered,true_icc,k_retained\n";
  for (const auto* s : studies)
    for (std::size_t i = 0; i < s->replicates.size(); ++i) {
      const auto& r = s->replicates[i];
      if (!r.ok) continue;
      out << s->config.scenario << ',' << i << ',' << io::format_double(r.icc) << ','
          << io::format_double(r.icc_lower) << ',' << io::format_double(r.icc_upper) << ',' << (r.icc_covered ? 1 : 0)
          << ',' << io::format_double(s->true_icc) << ',' << r.k_retained << '\n';
    }
  return out.str();
}

std::string coverage_profile_csv(const std::vector<const StudyResult*>& studies) {
  require_results(studies, true);
  std::ostringstream out;
  out << "scenario,effect,method,dimension,t,coverage,mc_se\n";
  for (const auto* s : studies)
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < kEffects; ++a) {
        const Eigen::VectorXd prof = s->coverage_profile(m, a);
        const std::size_t g = s->grid.size();
        for (std::size_t p = 0; p < s->dimensions.size(); ++p)
          for (std::size_t i = 0; i < g; ++i) {
            const double c = prof[static_cast<Eigen::Index>(p * g + i)];
            out << s->config.scenario << ",beta" << a << ',' << method_name(m) << ',' << s->dimensions[p] << ','
                << io::format_double(s->grid[i]) << ',' << io::format_double(c) << ','
                << io::format_double(mc_se(c, s->successes())) << '\n';
          }
      }
  return out.str();
}

}  // namespace mvfmm::sim
