#include "mvfmm/fitting.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mvfmm/error.hpp"
#include "mvfmm/parallel.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "fitting";

Eigen::MatrixXd stack_components(const MvFpcBasis& basis, std::span<const double> grid) {
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd out(g * basis.dimensions(), basis.n_components());
  for (int p = 0; p < basis.dimensions(); ++p)
    out.middleRows(p * g, g) = basis.component_on_grid(static_cast<std::size_t>(p), grid);
  return out;
}
}  // namespace

const char* to_string(CovariateKind kind) noexcept {
  return kind == CovariateKind::Continuous ? "continuous" : "categorical";
}

CovariateKind parse_covariate_kind(const std::string& text) {
  if (text == "continuous") return CovariateKind::Continuous;
  if (text == "categorical") return CovariateKind::Categorical;
  throw Error(ErrorKind::Spec, kModule, "unknown covariate kind '" + text + "'");
}

DesignCoding DesignCoding::resolve(const ModelSpec& spec, const FunctionalDataset& data) {
  if (data.rows() == 0) throw Error(ErrorKind::Data, kModule, "empty dataset");
  DesignCoding coding;
  coding.column_names.push_back("(Intercept)");
  for (const auto& cov : spec.covariates) {
    if (data.covariates.index_of(cov.name) < 0)
      throw Error(ErrorKind::Spec, kModule, "covariate '" + cov.name + "' not in the covariate table");
    std::vector<double> values;
    values.reserve(data.keys.size());
    for (const auto& key : data.keys) values.push_back(data.covariates.value(key.subject, key.side, cov.name));

    Term term;
    term.name = cov.name;
    term.kind = cov.kind;
    if (cov.kind == CovariateKind::Continuous) {
      if (cov.center) {
        double sum = 0;
        for (double v : values) sum += v;
        term.center = sum / static_cast<double>(values.size());
      }
      coding.column_names.push_back(cov.name);
    } else {
      std::set<double> levels;
      for (double v : values) {
        if (v != std::round(v))
          throw Error(ErrorKind::Spec, kModule, "categorical covariate '" + cov.name + "' has a non-integer code");
        levels.insert(v);
      }
      term.reference = cov.reference.value_or(*levels.begin());
      if (!levels.count(term.reference))
        throw Error(ErrorKind::Spec, kModule, "reference level of '" + cov.name + "' does not occur in the data");
      for (double l : levels) {
        if (l == term.reference) continue;
        term.levels.push_back(l);
        coding.column_names.push_back(cov.name + "=" + std::to_string(static_cast<long long>(l)));
      }
    }
    coding.terms.push_back(std::move(term));
  }
  return coding;
}

Eigen::RowVectorXd DesignCoding::encode(const std::map<std::string, double>& values) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(columns());
  row[0] = 1.0;
  int col = 1;
  for (const auto& term : terms) {
    const auto it = values.find(term.name);
    if (term.kind == CovariateKind::Continuous) {
      row[col++] = it == values.end() ? 0.0 : it->second - term.center;
    } else {
      const double level = it == values.end() ? term.reference : it->second;
      bool known = level == term.reference;
      for (double l : term.levels) {
        if (l == level) {
          row[col] = 1.0;
          known = true;
        }
        ++col;
      }
      if (!known)
        throw Error(ErrorKind::Spec, kModule,
                    "unknown level " + std::to_string(level) + " for covariate '" + term.name + "'");
    }
  }
  return row;
}

Eigen::MatrixXd DesignCoding::design(const FunctionalDataset& data) const {
  Eigen::MatrixXd X(data.rows(), columns());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const auto& key = data.keys[static_cast<std::size_t>(i)];
    std::map<std::string, double> values;
    for (const auto& term : terms) values[term.name] = data.covariates.value(key.subject, key.side, term.name);
    X.row(i) = encode(values);
  }
  return X;
}

ScoreFits fit_scores(const Eigen::MatrixXd& scores, const RemlProblem& problem, const RemlOptions& options,
                     int threads) {
  const auto K = scores.cols();
  ScoreFits out;
  out.bstar.resize(problem.p(), K);
  out.wald_var.resize(problem.p(), K);
  out.qstar.resize(K);
  out.sstar.resize(K);
  out.reports.resize(static_cast<std::size_t>(K));
  std::vector<std::string> errors(static_cast<std::size_t>(K));
#pragma omp parallel for num_threads(resolve_threads(threads)) schedule(static)
  for (Eigen::Index k = 0; k < K; ++k) {
    try {
      const LmmFit fit = problem.fit(scores.col(k), options);
      out.bstar.col(k) = fit.beta;
      out.wald_var.col(k) = fit.beta_cov.diagonal();
      out.qstar[k] = fit.q;
      out.sstar[k] = fit.s;
      out.reports[static_cast<std::size_t>(k)] = {static_cast<int>(k), fit.lambda, fit.converged, fit.boundary,
                                                  fit.at_upper};
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  }
  for (Eigen::Index k = 0; k < K; ++k)
    if (!errors[static_cast<std::size_t>(k)].empty())
      throw Error(ErrorKind::Model, kModule,
                  "score " + std::to_string(k + 1) + " fit failed: " + errors[static_cast<std::size_t>(k)]);
  return out;
}

FittedModel fit_model(const FunctionalDataset& data, const ModelSpec& spec, const FitOptions& options) {
  MvFpcBasis basis = mvfpca_fit(data.coefficients, data.layout, options.fpca);
  return fit_model_with_basis(data, spec, std::move(basis), options);
}

FittedModel fit_model_with_basis(const FunctionalDataset& data, const ModelSpec& spec, MvFpcBasis basis,
                                 const FitOptions& options) {
  if (data.coefficients.cols() != basis.total_size())
    throw Error(ErrorKind::Shape, kModule, "dataset layout does not match the basis");
  FittedModel model;
  model.spec = spec;
  model.coding = DesignCoding::resolve(spec, data);
  const Eigen::MatrixXd X = model.coding.design(data);
  const RemlProblem problem(X, data.subject_groups());
  const Eigen::MatrixXd scores = project_scores(basis, data.coefficients, false, options.threads);

  ScoreFits fits = fit_scores(scores, problem, options.reml, options.threads);
  std::vector<int> failed;
  for (const auto& r : fits.reports)
    if (!r.converged) failed.push_back(r.k + 1);
  if (!failed.empty()) {
    std::string list;
    for (int k : failed) list += (list.empty() ? "" : ", ") + std::to_string(k);
    throw Error(ErrorKind::Model, kModule, "score fits did not converge for k = " + list);
  }

  model.mean_residual = Eigen::VectorXd::Zero(basis.total_size());
  if (options.restore_mean_residual) {
    const Eigen::VectorXd theta_bar = data.coefficients.colwise().mean().transpose();
    const Eigen::VectorXd proj = basis.eigencoefs * (basis.gram * theta_bar);
    model.mean_residual = theta_bar - basis.eigencoefs.transpose() * proj;
  }
  model.basis = std::move(basis);
  model.bstar = std::move(fits.bstar);
  model.wald_var = std::move(fits.wald_var);
  model.qstar = std::move(fits.qstar);
  model.sstar = std::move(fits.sstar);
  model.reports = std::move(fits.reports);
  model.icc = icc(model.qstar, model.sstar);
  return model;
}

std::vector<Eigen::VectorXd> evaluate_coefficients(const std::vector<DimensionBasis>& layout,
                                                   const Eigen::VectorXd& coefficients,
                                                   std::span<const double> grid) {
  std::vector<Eigen::VectorXd> out;
  int off = 0;
  for (const auto& d : layout) {
    out.push_back(d.basis.evaluate(grid) * coefficients.segment(off, d.basis.size()));
    off += d.basis.size();
  }
  if (off != coefficients.size()) throw Error(ErrorKind::Shape, kModule, "coefficient length differs from layout");
  return out;
}

std::vector<Eigen::VectorXd> effect_function(const FittedModel& model, int a, std::span<const double> grid) {
  if (a < 0 || a >= model.n_effects())
    throw Error(ErrorKind::Domain, kModule, "effect index " + std::to_string(a) + " out of range");
  Eigen::VectorXd coef = model.basis.eigencoefs.transpose() * model.bstar.row(a).transpose();
  if (a == 0 && model.mean_residual.size() == coef.size()) coef += model.mean_residual;
  return evaluate_coefficients(model.basis.layout, coef, grid);
}

Eigen::MatrixXd CovarianceSurface::stacked() const {
  const auto g = static_cast<Eigen::Index>(grid.size());
  const int P = n_dimensions();
  Eigen::MatrixXd out(P * g, P * g);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) out.block(p * g, q * g, g, g) = block(p, q);
  return out;
}

CovarianceSurface diagonal_surface(const MvFpcBasis& basis, const Eigen::VectorXd& weights,
                                   std::span<const double> grid) {
  if (weights.size() != basis.n_components())
    throw Error(ErrorKind::Shape, kModule, "weight count differs from the number of components");
  const auto g = static_cast<Eigen::Index>(grid.size());
  const Eigen::MatrixXd phi = stack_components(basis, grid);
  Eigen::MatrixXd full = phi * weights.asDiagonal() * phi.transpose();
  full = 0.5 * (full + full.transpose());
  CovarianceSurface out;
  out.grid.assign(grid.begin(), grid.end());
  for (const auto& d : basis.layout) out.dimensions.push_back(d.label);
  const int P = basis.dimensions();
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) out.blocks.push_back(full.block(p * g, q * g, g, g));
  return out;
}

CovarianceSurface reconstruct_q(const FittedModel& model, std::span<const double> grid) {
  return diagonal_surface(model.basis, model.qstar, grid);
}

CovarianceSurface reconstruct_s(const FittedModel& model, std::span<const double> grid) {
  return diagonal_surface(model.basis, model.sstar, grid);
}

double icc(const Eigen::VectorXd& q, const Eigen::VectorXd& s) {
  const double sq = q.sum();
  const double total = sq + s.sum();
  if (!(total > 0)) throw Error(ErrorKind::Model, kModule, "ICC undefined: total variance is zero");
  return std::clamp(sq / total, 0.0, 1.0);
}

double icc(const FittedModel& model) { return icc(model.qstar, model.sstar); }

std::vector<Eigen::VectorXd> predict_mean(const FittedModel& model, const std::map<std::string, double>& covariates,
                                          std::span<const double> grid) {
  const Eigen::RowVectorXd x = model.coding.encode(covariates);
  Eigen::VectorXd coef = model.basis.eigencoefs.transpose() * (model.bstar.transpose() * x.transpose());
  if (model.mean_residual.size() == coef.size()) coef += model.mean_residual;
  return evaluate_coefficients(model.basis.layout, coef, grid);
}

}  // namespace mvfmm
