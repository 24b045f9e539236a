#include "mvfmm/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvfmm/error.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/kernels.hpp"
#include "mvfmm/parallel.hpp"
#include "mvfmm/stats.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "inference";
constexpr std::uint64_t kResampleTag = 0xb007;

Eigen::MatrixXd stacked_components(const MvFpcBasis& basis, std::span<const double> grid) {
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd out(g * basis.dimensions(), basis.n_components());
  for (int p = 0; p < basis.dimensions(); ++p)
    out.middleRows(p * g, g) = basis.component_on_grid(static_cast<std::size_t>(p), grid);
  return out;
}

void check_effect(const FittedModel& model, int a) {
  if (a < 0 || a >= model.n_effects())
    throw Error(ErrorKind::Domain, kModule, "effect index " + std::to_string(a) + " out of range");
}

void check_level(double level) {
  if (!(level > 0 && level < 1)) throw Error(ErrorKind::Config, kModule, "level must lie in (0, 1)");
}

// Fills point and se; returns the stacked se vector.
Eigen::VectorXd fill_point_se(Band& band, const FittedModel& model, int a, std::span<const double> grid,
                              const Eigen::MatrixXd& phi, const Eigen::MatrixXd& cov) {
  const int K = model.n_components();
  if (cov.rows() != K || cov.cols() != K)
    throw Error(ErrorKind::Shape, kModule, "coefficient covariance must be K x K");
  band.effect = a;
  band.grid.assign(grid.begin(), grid.end());
  for (const auto& d : model.basis.layout) band.dimensions.push_back(d.label);
  band.point = effect_function(model, a, grid);
  Eigen::VectorXd var = ((phi * cov).array() * phi.array()).rowwise().sum();
  for (Eigen::Index i = 0; i < var.size(); ++i)
    if (var[i] < 0) {
      var[i] = 0;
      band.variance_clamped = true;
    }
  const Eigen::VectorXd se = var.cwiseSqrt();
  const auto g = static_cast<Eigen::Index>(grid.size());
  for (int p = 0; p < model.basis.dimensions(); ++p) band.se.push_back(se.segment(p * g, g));
  return se;
}

void apply_multiplier(Band& band) {
  for (std::size_t p = 0; p < band.point.size(); ++p) {
    band.lower.push_back(band.point[p] - band.multiplier * band.se[p]);
    band.upper.push_back(band.point[p] + band.multiplier * band.se[p]);
  }
}
}  // namespace

const char* to_string(BandKind kind) noexcept {
  switch (kind) {
    case BandKind::PointwiseWald: return "pointwise_wald";
    case BandKind::PointwiseBoot: return "pointwise_boot";
    case BandKind::Simultaneous: return "simultaneous";
  }
  return "?";
}

Eigen::MatrixXd wald_covariance(const FittedModel& model, int a) {
  check_effect(model, a);
  return model.wald_var.row(a).transpose().asDiagonal();
}

Band pointwise_band(const FittedModel& model, int a, std::span<const double> grid, const Eigen::MatrixXd& cov,
                    double level, BandKind kind) {
  check_effect(model, a);
  check_level(level);
  Band band;
  band.kind = kind;
  band.level = level;
  fill_point_se(band, model, a, grid, stacked_components(model.basis, grid), cov);
  band.multiplier = normal_quantile(1.0 - (1.0 - level) / 2.0);
  apply_multiplier(band);
  return band;
}

Band wald_pointwise(const FittedModel& model, int a, std::span<const double> grid, double level) {
  return pointwise_band(model, a, grid, wald_covariance(model, a), level, BandKind::PointwiseWald);
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Covariance, kModule, "eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  if (ev.size() && ev.minCoeff() < -1e-8 * top)
    throw Error(ErrorKind::Covariance, kModule, "coefficient covariance is not positive semi-definite");
  const Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Band simultaneous_band(const FittedModel& model, int a, std::span<const double> grid, const Eigen::MatrixXd& cov,
                       const SimultaneousOptions& options) {
  check_effect(model, a);
  check_level(options.level);
  if (options.draws < 1) throw Error(ErrorKind::Config, kModule, "need at least one draw");
  const Eigen::MatrixXd factor = covariance_factor(cov);
  const Eigen::MatrixXd phi = stacked_components(model.basis, grid);
  Band band;
  band.kind = BandKind::Simultaneous;
  band.level = options.level;
  const Eigen::VectorXd se = fill_point_se(band, model, a, grid, phi, cov);
  const double cutoff = 1e-12 * (se.size() ? se.maxCoeff() : 0.0);
  Eigen::VectorXd inv_se = Eigen::VectorXd::Zero(se.size());
  for (Eigen::Index i = 0; i < se.size(); ++i) {
    if (se[i] > cutoff && se[i] > 0)
      inv_se[i] = 1.0 / se[i];
    else
      ++band.excluded_points;
  }
  Eigen::VectorXd z = kernels::max_statistic(phi, inv_se, factor, options.seed, options.draws, options.threads);
  std::sort(z.data(), z.data() + z.size());
  band.multiplier = order_statistic_ceiling(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())),
                                            options.level);
  apply_multiplier(band);
  return band;
}

std::vector<int> resample_subjects(int n_subjects, std::uint64_t seed, int replicate) {
  auto rng = make_stream(seed, static_cast<std::uint64_t>(replicate), kResampleTag);
  std::uniform_int_distribution<int> pick(0, n_subjects - 1);
  std::vector<int> out(static_cast<std::size_t>(n_subjects));
  for (auto& v : out) v = pick(rng);
  return out;
}

BootstrapResult bootstrap_of_subjects(const FunctionalDataset& data, const FittedModel& model,
                                      const BootstrapOptions& options) {
  if (options.replicates < 2) throw Error(ErrorKind::Config, kModule, "bootstrap needs at least 2 replicates");
  const int threads = resolve_threads(options.threads);
  const Eigen::MatrixXd scores = project_scores(model.basis, data.coefficients, false, 1);
  const Eigen::MatrixXd X = model.coding.design(data);
  int n_subjects = 0;
  const std::vector<int> groups = data.subject_groups(&n_subjects);
  std::vector<std::vector<Eigen::Index>> rows_of(static_cast<std::size_t>(n_subjects));
  for (std::size_t i = 0; i < groups.size(); ++i)
    rows_of[static_cast<std::size_t>(groups[i])].push_back(static_cast<Eigen::Index>(i));

  const int B = options.replicates;
  const int A = model.n_effects();
  const int K = model.n_components();
  std::vector<Eigen::MatrixXd> beta(static_cast<std::size_t>(B));
  std::vector<double> iccs(static_cast<std::size_t>(B), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(B), 0);

#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int r = 0; r < B; ++r) {
    std::vector<int> draw;
    if (options.identity_resample) {
      draw.resize(static_cast<std::size_t>(n_subjects));
      for (int i = 0; i < n_subjects; ++i) draw[static_cast<std::size_t>(i)] = i;
    } else {
      draw = resample_subjects(n_subjects, options.seed, r);
    }
    Eigen::Index n = 0;
    for (int s : draw) n += static_cast<Eigen::Index>(rows_of[static_cast<std::size_t>(s)].size());
    Eigen::MatrixXd Xr(n, X.cols());
    Eigen::MatrixXd Sr(n, scores.cols());
    std::vector<int> gr(static_cast<std::size_t>(n));
    Eigen::Index at = 0;
    for (std::size_t pseudo = 0; pseudo < draw.size(); ++pseudo) {
      for (Eigen::Index row : rows_of[static_cast<std::size_t>(draw[pseudo])]) {
        Xr.row(at) = X.row(row);
        Sr.row(at) = scores.row(row);
        gr[static_cast<std::size_t>(at)] = static_cast<int>(pseudo);
        ++at;
      }
    }
    try {
      const RemlProblem problem(std::move(Xr), std::move(gr));
      const ScoreFits fits = fit_scores(Sr, problem, options.reml, 1);
      bool converged = true;
      for (const auto& rep : fits.reports) converged = converged && rep.converged;
      if (converged) {
        beta[static_cast<std::size_t>(r)] = fits.bstar;
        iccs[static_cast<std::size_t>(r)] = icc(fits.qstar, fits.sstar);
        ok[static_cast<std::size_t>(r)] = 1;
      }
    } catch (const Error&) {
      // counted as a failure below
    }
  }

  BootstrapResult out;
  out.seed = options.seed;
  for (char c : ok) out.replicates += c;
  out.failures = B - out.replicates;
  if (out.replicates == 0) throw Error(ErrorKind::Inference, kModule, "every bootstrap replicate failed");
  out.icc_samples.resize(out.replicates);
  for (int a = 0; a < A; ++a) out.samples.emplace_back(out.replicates, K);
  int at = 0;
  for (int r = 0; r < B; ++r) {
    if (!ok[static_cast<std::size_t>(r)]) continue;
    for (int a = 0; a < A; ++a) out.samples[static_cast<std::size_t>(a)].row(at) = beta[static_cast<std::size_t>(r)].row(a);
    out.icc_samples[at] = iccs[static_cast<std::size_t>(r)];
    ++at;
  }
  for (int a = 0; a < A; ++a) {
    const Eigen::MatrixXd& s = out.samples[static_cast<std::size_t>(a)];
    const Eigen::MatrixXd centered = s.rowwise() - s.colwise().mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(K, K);
    if (out.replicates > 1) cov = centered.transpose() * centered / static_cast<double>(out.replicates - 1);
    out.covariance.push_back(0.5 * (cov + cov.transpose()));
  }
  return out;
}

std::pair<double, double> icc_interval(std::span<const double> samples, double level) {
  check_level(level);
  if (samples.empty()) throw Error(ErrorKind::Inference, kModule, "no bootstrap samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double alpha = 1.0 - level;
  return {order_statistic_ceiling(sorted, alpha / 2.0), order_statistic_ceiling(sorted, 1.0 - alpha / 2.0)};
}

double mc_se(double p, int n_sim) {
  if (!(p >= 0 && p <= 1) || n_sim < 1) throw Error(ErrorKind::Domain, kModule, "mc_se needs p in [0,1], n >= 1");
  return std::sqrt(p * (1.0 - p) / n_sim);
}

std::string bands_csv(const std::vector<Band>& bands, const std::vector<std::string>& effect_names) {
  std::ostringstream out;
  out << "effect,dimension,t,point,se,lower,upper,kind,level,multiplier\n";
  for (const auto& b : bands) {
    const std::string name = b.effect < static_cast<int>(effect_names.size())
                                 ? effect_names[static_cast<std::size_t>(b.effect)]
                                 : std::to_string(b.effect);
    for (std::size_t p = 0; p < b.dimensions.size(); ++p)
      for (std::size_t i = 0; i < b.grid.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out << name << ',' << b.dimensions[p] << ',' << io::format_double(b.grid[i]) << ','
            << io::format_double(b.point[p][ii]) << ',' << io::format_double(b.se[p][ii]) << ','
            << io::format_double(b.lower[p][ii]) << ',' << io::format_double(b.upper[p][ii]) << ','
            << to_string(b.kind) << ',' << io::format_double(b.level) << ',' << io::format_double(b.multiplier)
            << '\n';
      }
  }
  return out.str();
}

}  // namespace mvfmm
