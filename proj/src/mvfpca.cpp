#include "mvfmm/mvfpca.hpp"

#include <algorithm>
#include <cmath>

#include "mvfmm/error.hpp"
#include "mvfmm/kernels.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "mvfpca";
constexpr double kRelativeFloor = 1e-12;
}  // namespace

int MvFpcBasis::offset(std::size_t dimension) const {
  int m = 0;
  for (std::size_t i = 0; i < dimension; ++i) m += layout[i].basis.size();
  return m;
}

Eigen::VectorXd MvFpcBasis::cumulative_pve() const {
  Eigen::VectorXd out(all_eigenvalues.size());
  const double total = all_eigenvalues.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < all_eigenvalues.size(); ++k) {
    acc += all_eigenvalues[k];
    out[k] = total > 0 ? acc / total : 1.0;
  }
  return out;
}

Eigen::MatrixXd MvFpcBasis::component_on_grid(std::size_t dimension, std::span<const double> grid) const {
  if (dimension >= layout.size()) throw Error(ErrorKind::Domain, kModule, "dimension index out of range");
  const auto& b = layout[dimension].basis;
  const Eigen::MatrixXd phi = b.evaluate(grid);
  return phi * eigencoefs.middleCols(offset(dimension), b.size()).transpose();
}

Eigen::MatrixXd block_gram(const std::vector<DimensionBasis>& layout) {
  std::vector<Eigen::MatrixXd> grams;
  for (const auto& d : layout) grams.push_back(gram_matrix(d.basis));
  int m = 0;
  for (const auto& g : grams) m += static_cast<int>(g.rows());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  int off = 0;
  for (const auto& g : grams) {
    w.block(off, off, g.rows(), g.cols()) = g;
    off += static_cast<int>(g.rows());
  }
  return w;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> metric_eigen(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> metric(gram);
  if (metric.info() != Eigen::Success) throw Error(ErrorKind::Metric, kModule, "Gram eigendecomposition failed");
  const Eigen::VectorXd mev = metric.eigenvalues();
  const double max_ev = mev.maxCoeff();
  if (!(max_ev > 0) || mev.minCoeff() < kRelativeFloor * max_ev)
    throw Error(ErrorKind::Metric, kModule, "Gram metric is numerically singular");
  const Eigen::VectorXd floored = mev.cwiseMax(kRelativeFloor * max_ev);
  const Eigen::MatrixXd& v = metric.eigenvectors();
  const Eigen::MatrixXd w_half = v * floored.cwiseSqrt().asDiagonal() * v.transpose();
  const Eigen::MatrixXd w_inv_half = v * floored.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();

  Eigen::MatrixXd a = w_half * cov * w_half;
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, kModule, "eigendecomposition failed");

  const Eigen::Index m = a.rows();
  const double top = es.eigenvalues()[m - 1];
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = m - 1; j >= 0; --j)
    if (top > 0 && es.eigenvalues()[j] > kRelativeFloor * top) keep.push_back(j);

  Eigen::VectorXd values(static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd coefs(static_cast<Eigen::Index>(keep.size()), m);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    values[row] = es.eigenvalues()[keep[i]];
    Eigen::VectorXd c = w_inv_half * es.eigenvectors().col(keep[i]);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < c.size(); ++j)
      if (std::abs(c[j]) > std::abs(c[arg])) arg = j;
    if (c[arg] < 0) c = -c;
    coefs.row(row) = c.transpose();
  }
  return {values, coefs};
}

MvFpcBasis mvfpca_fit(const Eigen::MatrixXd& coeffs, const std::vector<DimensionBasis>& layout,
                      const MvFpcaOptions& options) {
  std::vector<Eigen::MatrixXd> grams;
  for (const auto& d : layout) grams.push_back(gram_matrix(d.basis));
  return mvfpca_fit(coeffs, layout, grams, options);
}

MvFpcBasis mvfpca_fit(const Eigen::MatrixXd& coeffs, const std::vector<DimensionBasis>& layout,
                      const std::vector<Eigen::MatrixXd>& grams, const MvFpcaOptions& options) {
  if (coeffs.rows() < 2) throw Error(ErrorKind::Data, kModule, "mv-FPCA needs at least 2 observations");
  if (!(options.pve_target > 0.0 && options.pve_target <= 1.0))
    throw Error(ErrorKind::Config, kModule, "pve target must lie in (0, 1]");
  if (grams.size() != layout.size()) throw Error(ErrorKind::Shape, kModule, "one Gram matrix per dimension required");
  Eigen::Index m = 0;
  for (std::size_t p = 0; p < layout.size(); ++p) {
    if (grams[p].rows() != layout[p].basis.size() || grams[p].cols() != layout[p].basis.size())
      throw Error(ErrorKind::Shape, kModule, "Gram matrix size differs from basis size for '" + layout[p].label + "'");
    m += grams[p].rows();
  }
  if (coeffs.cols() != m) throw Error(ErrorKind::Shape, kModule, "coefficient width differs from layout");

  MvFpcBasis out;
  out.layout = layout;
  out.pve_target = options.pve_target;
  out.gram = Eigen::MatrixXd::Zero(m, m);
  Eigen::Index off = 0;
  for (const auto& g : grams) {
    out.gram.block(off, off, g.rows(), g.cols()) = g;
    off += g.rows();
  }

  const auto n = coeffs.rows();
  out.mean = coeffs.colwise().mean().transpose();
  const Eigen::MatrixXd centered = coeffs.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
  cov = cov.selfadjointView<Eigen::Lower>();

  auto [values, coefs] = metric_eigen(cov, out.gram);
  out.all_eigenvalues = values;
  const int available = static_cast<int>(values.size());
  int k_max = options.k_max > 0 ? options.k_max : static_cast<int>(std::min<Eigen::Index>(n - 1, m));
  k_max = std::min(k_max, available);
  if (k_max < 1) throw Error(ErrorKind::Data, kModule, "data have no variation to decompose");

  const Eigen::VectorXd cum = out.cumulative_pve();
  int keep = available;
  for (int k = 0; k < available; ++k)
    if (cum[k] >= options.pve_target - 1e-15) {
      keep = k + 1;
      break;
    }
  keep = std::min(keep, k_max);
  out.eigenvalues = values.head(keep);
  out.eigencoefs = coefs.topRows(keep);
  return out;
}

Eigen::MatrixXd project_scores(const MvFpcBasis& basis, const Eigen::MatrixXd& coeffs, bool centered, int threads) {
  if (coeffs.cols() != basis.total_size())
    throw Error(ErrorKind::Shape, kModule, "coefficient layout does not match the basis");
  const Eigen::MatrixXd projection = basis.gram * basis.eigencoefs.transpose();
  const Eigen::VectorXd centering = centered ? basis.mean : Eigen::VectorXd::Zero(basis.total_size());
  return kernels::project_rows(coeffs, centering, projection, threads);
}

std::vector<Eigen::MatrixXd> reconstruct(const MvFpcBasis& basis, const Eigen::MatrixXd& scores,
                                         std::span<const double> grid, bool add_mean) {
  if (scores.cols() != basis.n_components())
    throw Error(ErrorKind::Shape, kModule, "score width differs from the number of components");
  Eigen::MatrixXd coefs = scores * basis.eigencoefs;
  if (add_mean) coefs.rowwise() += basis.mean.transpose();
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t p = 0; p < basis.layout.size(); ++p) {
    const auto& b = basis.layout[p].basis;
    out.push_back(coefs.middleCols(basis.offset(p), b.size()) * b.evaluate(grid).transpose());
  }
  return out;
}

std::vector<ScreeRow> scree_report(const MvFpcBasis& basis) {
  const Eigen::VectorXd cum = basis.cumulative_pve();
  std::vector<ScreeRow> rows;
  for (Eigen::Index k = 0; k < basis.all_eigenvalues.size(); ++k)
    rows.push_back({static_cast<int>(k + 1), basis.all_eigenvalues[k], cum[k]});
  return rows;
}

}  // namespace mvfmm
