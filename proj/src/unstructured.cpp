#include "mvfmm/unstructured.hpp"

#include <sstream>

#include "mvfmm/error.hpp"
#include "mvfmm/io.hpp"
#include "mvfmm/kernels.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "unstructured";

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = grid[static_cast<std::size_t>(i + 1)] - grid[static_cast<std::size_t>(i)];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}
}  // namespace

const char* to_string(SurfaceKind kind) noexcept { return kind == SurfaceKind::Q ? "Q" : "S"; }

UnstructuredCov unstructured_fit(const Eigen::MatrixXd& centered, std::span<const int> groups,
                                 const std::vector<DimensionBasis>& layout, int threads) {
  if (static_cast<Eigen::Index>(groups.size()) != centered.rows())
    throw Error(ErrorKind::Shape, kModule, "group vector length differs from the number of rows");
  int total = 0;
  for (const auto& d : layout) total += d.basis.size();
  if (total != centered.cols()) throw Error(ErrorKind::Shape, kModule, "coefficient width differs from layout");
  int n_groups = 0;
  for (int g : groups) {
    if (g < 0) throw Error(ErrorKind::Grouping, kModule, "negative group id");
    n_groups = std::max(n_groups, g + 1);
  }
  const kernels::MomentSums m = kernels::moment_sums(centered, groups, n_groups, threads);
  const double n = m.rows;
  const double a11 = m.sum_squared_sizes;
  if (!(a11 > n))
    throw Error(ErrorKind::Grouping, kModule, "every subject has a single observation; Q is not identifiable");

  UnstructuredCov out;
  out.layout = layout;
  out.q = (m.subject_outer - m.row_outer) / (a11 - n);
  out.s = (a11 * m.row_outer - n * m.subject_outer) / (n * (a11 - n));
  out.q = 0.5 * (out.q + out.q.transpose());
  out.s = 0.5 * (out.s + out.s.transpose());
  out.q_min_eigenvalue = min_eigenvalue(out.q);
  out.s_min_eigenvalue = min_eigenvalue(out.s);
  return out;
}

Eigen::MatrixXd centered_coefficients(const FittedModel& model, const FunctionalDataset& data) {
  if (data.coefficients.cols() != model.basis.total_size())
    throw Error(ErrorKind::Shape, kModule, "dataset layout does not match the model");
  const Eigen::MatrixXd X = model.coding.design(data);
  Eigen::MatrixXd fitted = X * model.bstar * model.basis.eigencoefs;
  if (model.mean_residual.size() == fitted.cols()) fitted.rowwise() += model.mean_residual.transpose();
  return data.coefficients - fitted;
}

UnstructuredCov unstructured_fit(const FittedModel& model, const FunctionalDataset& data, int threads) {
  return unstructured_fit(centered_coefficients(model, data), data.subject_groups(), data.layout, threads);
}

CovarianceSurface coefficient_surface(const std::vector<DimensionBasis>& layout, const Eigen::MatrixXd& coef,
                                      std::span<const double> grid) {
  const auto g = static_cast<Eigen::Index>(grid.size());
  const int P = static_cast<int>(layout.size());
  int M = 0;
  for (const auto& d : layout) M += d.basis.size();
  if (coef.rows() != M || coef.cols() != M)
    throw Error(ErrorKind::Shape, kModule, "coefficient matrix does not match the layout");
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(P * g, M);
  int off = 0;
  for (int p = 0; p < P; ++p) {
    const auto& b = layout[static_cast<std::size_t>(p)].basis;
    phi.block(p * g, off, g, b.size()) = b.evaluate(grid);
    off += b.size();
  }
  Eigen::MatrixXd full = phi * coef * phi.transpose();
  full = 0.5 * (full + full.transpose());
  CovarianceSurface out;
  out.grid.assign(grid.begin(), grid.end());
  for (const auto& d : layout) out.dimensions.push_back(d.label);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) out.blocks.push_back(full.block(p * g, q * g, g, g));
  return out;
}

CovarianceSurface surface(const UnstructuredCov& cov, SurfaceKind which, std::span<const double> grid) {
  return coefficient_surface(cov.layout, which == SurfaceKind::Q ? cov.q : cov.s, grid);
}

double cov_ise(const CovarianceSurface& estimate, const CovarianceSurface& reference) {
  if (estimate.grid != reference.grid) throw Error(ErrorKind::Shape, kModule, "surface grids differ");
  if (estimate.blocks.size() != reference.blocks.size())
    throw Error(ErrorKind::Shape, kModule, "surface layouts differ");
  const Eigen::VectorXd w = trapezoid_weights(estimate.grid);
  double total = 0.0;
  for (std::size_t b = 0; b < estimate.blocks.size(); ++b) {
    const Eigen::MatrixXd d = (estimate.blocks[b] - reference.blocks[b]).array().square().matrix();
    total += w.dot(d * w);
  }
  return total;
}

std::string surfaces_csv(const std::vector<std::pair<std::string, const CovarianceSurface*>>& surfaces) {
  std::ostringstream out;
  out << "which,p,p2,t,t2,value\n";
  for (const auto& [name, s] : surfaces) {
    const int P = s->n_dimensions();
    for (int p = 0; p < P; ++p)
      for (int q = 0; q < P; ++q) {
        const Eigen::MatrixXd& b = s->block(p, q);
        for (std::size_t i = 0; i < s->grid.size(); ++i)
          for (std::size_t j = 0; j < s->grid.size(); ++j)
            out << name << ',' << s->dimensions[static_cast<std::size_t>(p)] << ','
                << s->dimensions[static_cast<std::size_t>(q)] << ',' << io::format_double(s->grid[i]) << ','
                << io::format_double(s->grid[j]) << ','
                << io::format_double(b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
      }
  }
  return out.str();
}

}  // namespace mvfmm
