#include "mvfmm/serialize.hpp"

#include <set>

#include "mvfmm/error.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "serialize";

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, kModule, std::string(what) + ": " + e.what());
  }
}
}  // namespace

void check_schema_version(const Json& j, const char* what) {
  if (!j.is_object()) throw Error(ErrorKind::Config, kModule, std::string(what) + ": expected a JSON object");
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw Error(ErrorKind::Config, kModule,
                std::string(what) + ": unsupported schema_version " + j.at("schema_version").dump());
}

Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  return guarded("matrix", [&] {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Json& row = j.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != cols)
        throw Error(ErrorKind::Config, kModule, "ragged matrix in JSON");
      for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
  });
}

Eigen::VectorXd vector_from_json(const Json& j) {
  return guarded("vector", [&] {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
  });
}

Json to_json(const BasisSystem& b) {
  Json j{{"kind", to_string(b.kind())}, {"size", b.size()}, {"domain_end", b.domain_end()}};
  if (b.kind() == BasisKind::BSpline) j["order"] = b.order();
  return j;
}

BasisSystem basis_from_json(const Json& j) {
  return guarded("basis", [&] {
    const BasisKind kind = parse_basis_kind(j.at("kind").get<std::string>());
    const int size = j.at("size").get<int>();
    const double end = j.value("domain_end", 100.0);
    switch (kind) {
      case BasisKind::BSpline: return BasisSystem::bspline(size, j.value("order", 4), end);
      case BasisKind::Fourier: return BasisSystem::fourier(size, end);
      case BasisKind::Legendre: return BasisSystem::legendre(size - 1, end);
    }
    throw Error(ErrorKind::Config, kModule, "unknown basis kind");
  });
}

Json to_json(const std::vector<DimensionBasis>& layout) {
  Json out = Json::array();
  for (const auto& d : layout) out.push_back({{"label", d.label}, {"basis", to_json(d.basis)}});
  return out;
}

std::vector<DimensionBasis> layout_from_json(const Json& j) {
  return guarded("layout", [&] {
    std::vector<DimensionBasis> out;
    for (const auto& d : j) out.push_back({d.at("label").get<std::string>(), basis_from_json(d.at("basis"))});
    return out;
  });
}

Json to_json(const MvFpcBasis& b) {
  return {{"layout", to_json(b.layout)},
          {"mean", to_json(b.mean)},
          {"eigenvalues", to_json(b.eigenvalues)},
          {"all_eigenvalues", to_json(b.all_eigenvalues)},
          {"eigencoefs", to_json(b.eigencoefs)},
          {"gram", to_json(b.gram)},
          {"pve_target", b.pve_target}};
}

MvFpcBasis mvfpc_basis_from_json(const Json& j) {
  return guarded("mvfpc basis", [&] {
    MvFpcBasis b;
    b.layout = layout_from_json(j.at("layout"));
    b.mean = vector_from_json(j.at("mean"));
    b.eigenvalues = vector_from_json(j.at("eigenvalues"));
    b.all_eigenvalues = vector_from_json(j.at("all_eigenvalues"));
    b.eigencoefs = matrix_from_json(j.at("eigencoefs"));
    b.gram = matrix_from_json(j.at("gram"));
    b.pve_target = j.at("pve_target").get<double>();
    int m = 0;
    for (const auto& d : b.layout) m += d.basis.size();
    if (b.mean.size() != m || b.gram.rows() != m || b.gram.cols() != m ||
        (b.eigencoefs.rows() > 0 && b.eigencoefs.cols() != m) || b.eigenvalues.size() != b.eigencoefs.rows())
      throw Error(ErrorKind::Shape, kModule, "basis arrays do not match the layout");
    return b;
  });
}

Json to_json(const ModelSpec& spec) {
  Json covs = Json::array();
  for (const auto& c : spec.covariates) {
    Json j{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.kind == CovariateKind::Continuous) j["center"] = c.center;
    if (c.reference) j["reference"] = *c.reference;
    covs.push_back(std::move(j));
  }
  return {{"covariates", covs}};
}

ModelSpec model_spec_from_json(const Json& j) {
  return guarded("model spec", [&] {
    ModelSpec spec;
    for (const auto& c : j.at("covariates")) {
      CovariateSpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.kind = parse_covariate_kind(c.value("kind", std::string("continuous")));
      cs.center = c.value("center", true);
      if (c.contains("reference")) cs.reference = c.at("reference").get<double>();
      spec.covariates.push_back(std::move(cs));
    }
    return spec;
  });
}

Json to_json(const FittedModel& m) {
  Json terms = Json::array();
  for (const auto& t : m.coding.terms)
    terms.push_back({{"name", t.name},
                     {"kind", to_string(t.kind)},
                     {"center", t.center},
                     {"reference", t.reference},
                     {"levels", t.levels}});
  Json reports = Json::array();
  for (const auto& r : m.reports)
    reports.push_back({{"k", r.k + 1},
                       {"lambda", r.lambda},
                       {"converged", r.converged},
                       {"boundary", r.boundary},
                       {"at_upper", r.at_upper}});
  Json j{{"schema_version", kSchemaVersion},
         {"spec", to_json(m.spec)},
         {"coding", {{"terms", terms}, {"columns", m.coding.column_names}}},
         {"basis", to_json(m.basis)},
         {"bstar", to_json(m.bstar)},
         {"wald_var", to_json(m.wald_var)},
         {"qstar", to_json(m.qstar)},
         {"sstar", to_json(m.sstar)},
         {"mean_residual", to_json(m.mean_residual)},
         {"icc", m.icc},
         {"reports", reports}};
  if (m.boot_cov) {
    Json covs = Json::array();
    for (const auto& c : *m.boot_cov) covs.push_back(to_json(c));
    j["boot_cov"] = covs;
  }
  return j;
}

FittedModel fitted_model_from_json(const Json& j) {
  check_schema_version(j, "model");
  return guarded("model", [&] {
    FittedModel m;
    m.spec = model_spec_from_json(j.at("spec"));
    for (const auto& t : j.at("coding").at("terms")) {
      DesignCoding::Term term;
      term.name = t.at("name").get<std::string>();
      term.kind = parse_covariate_kind(t.at("kind").get<std::string>());
      term.center = t.at("center").get<double>();
      term.reference = t.at("reference").get<double>();
      term.levels = t.at("levels").get<std::vector<double>>();
      m.coding.terms.push_back(std::move(term));
    }
    m.coding.column_names = j.at("coding").at("columns").get<std::vector<std::string>>();
    m.basis = mvfpc_basis_from_json(j.at("basis"));
    m.bstar = matrix_from_json(j.at("bstar"));
    m.wald_var = matrix_from_json(j.at("wald_var"));
    m.qstar = vector_from_json(j.at("qstar"));
    m.sstar = vector_from_json(j.at("sstar"));
    m.mean_residual = vector_from_json(j.at("mean_residual"));
    m.icc = j.at("icc").get<double>();
    for (const auto& r : j.at("reports"))
      m.reports.push_back({r.at("k").get<int>() - 1, r.at("lambda").get<double>(), r.at("converged").get<bool>(),
                           r.at("boundary").get<bool>(), r.at("at_upper").get<bool>()});
    if (j.contains("boot_cov")) {
      std::vector<Eigen::MatrixXd> covs;
      for (const auto& c : j.at("boot_cov")) covs.push_back(matrix_from_json(c));
      m.boot_cov = std::move(covs);
    }
    const auto K = m.basis.n_components();
    if (m.bstar.cols() != K || m.wald_var.cols() != K || m.qstar.size() != K || m.sstar.size() != K ||
        m.bstar.rows() != m.coding.columns())
      throw Error(ErrorKind::Shape, kModule, "model arrays are inconsistent");
    return m;
  });
}

Json to_json(const BootstrapResult& boot) {
  Json covs = Json::array();
  for (const auto& c : boot.covariance) covs.push_back(to_json(c));
  return {{"schema_version", kSchemaVersion},
          {"replicates", boot.replicates},
          {"failures", boot.failures},
          {"seed", boot.seed},
          {"covariance", covs},
          {"icc_samples", to_json(boot.icc_samples)}};
}

sim::ScenarioConfig scenario_from_json(const Json& j) {
  check_schema_version(j, "scenario");
  static const std::set<std::string> known{
      "schema_version", "scenario", "subjects", "sides", "grid_points", "domain_end", "dimensions",
      "components", "generator_size", "analysis_size", "total_variance", "decay", "icc", "sex_probability",
      "speed_mean", "speed_sd", "pve", "seed", "fixed_effects", "q", "s"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(ErrorKind::Config, kModule, "scenario: unknown key '" + key + "'");
  return guarded("scenario", [&] {
    sim::ScenarioConfig c;
    c.scenario = j.value("scenario", c.scenario);
    c.subjects = j.value("subjects", c.subjects);
    c.sides = j.value("sides", c.sides);
    c.grid_points = j.value("grid_points", c.grid_points);
    c.domain_end = j.value("domain_end", c.domain_end);
    c.dimensions = j.value("dimensions", c.dimensions);
    c.components = j.value("components", c.components);
    c.generator_size = j.value("generator_size", c.generator_size);
    c.analysis_size = j.value("analysis_size", c.analysis_size);
    c.total_variance = j.value("total_variance", c.total_variance);
    c.decay = j.value("decay", c.decay);
    c.icc = j.value("icc", c.icc);
    c.sex_probability = j.value("sex_probability", c.sex_probability);
    c.speed_mean = j.value("speed_mean", c.speed_mean);
    c.speed_sd = j.value("speed_sd", c.speed_sd);
    c.pve = j.value("pve", c.pve);
    c.seed = j.value("seed", c.seed);
    if (j.contains("fixed_effects")) c.fixed_effects = matrix_from_json(j.at("fixed_effects"));
    if (j.contains("q")) c.q = vector_from_json(j.at("q"));
    if (j.contains("s")) c.s = vector_from_json(j.at("s"));
    c.validate();
    return c;
  });
}

Json to_json(const sim::ScenarioConfig& c) {
  Json j{{"schema_version", kSchemaVersion},
         {"scenario", c.scenario},
         {"subjects", c.subjects},
         {"sides", c.sides},
         {"grid_points", c.grid_points},
         {"domain_end", c.domain_end},
         {"dimensions", c.dimensions},
         {"components", c.components},
         {"generator_size", c.generator_size},
         {"analysis_size", c.analysis_size},
         {"total_variance", c.total_variance},
         {"decay", c.decay},
         {"icc", c.icc},
         {"sex_probability", c.sex_probability},
         {"speed_mean", c.speed_mean},
         {"speed_sd", c.speed_sd},
         {"pve", c.pve},
         {"seed", c.seed}};
  if (c.fixed_effects) j["fixed_effects"] = to_json(*c.fixed_effects);
  if (c.q) j["q"] = to_json(*c.q);
  if (c.s) j["s"] = to_json(*c.s);
  return j;
}

}  // namespace mvfmm
