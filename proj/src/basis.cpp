#include "mvfmm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mvfmm/error.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "basis";

void check_domain(double domain_end) {
  if (!(domain_end > 0.0)) throw Error(ErrorKind::Config, kModule, "domain end must be positive");
}
}  // namespace

const char* to_string(BasisKind kind) noexcept {
  switch (kind) {
    case BasisKind::BSpline: return "bspline";
    case BasisKind::Fourier: return "fourier";
    case BasisKind::Legendre: return "legendre";
  }
  return "unknown";
}

BasisKind parse_basis_kind(const std::string& text) {
  if (text == "bspline") return BasisKind::BSpline;
  if (text == "fourier") return BasisKind::Fourier;
  if (text == "legendre") return BasisKind::Legendre;
  throw Error(ErrorKind::Config, kModule, "unknown basis kind '" + text + "'");
}

BasisSystem BasisSystem::bspline(int size, int order, double domain_end) {
  check_domain(domain_end);
  if (order < 1) throw Error(ErrorKind::Config, kModule, "B-spline order must be at least 1");
  if (size < order)
    throw Error(ErrorKind::Config, kModule,
                "B-spline basis of size " + std::to_string(size) + " is smaller than its order " +
                    std::to_string(order));
  BasisSystem b;
  b.kind_ = BasisKind::BSpline;
  b.size_ = size;
  b.order_ = order;
  b.domain_end_ = domain_end;
  const int intervals = size - order + 1;
  b.knots_.assign(order, 0.0);
  for (int i = 1; i < intervals; ++i) b.knots_.push_back(domain_end * i / intervals);
  b.knots_.insert(b.knots_.end(), order, domain_end);
  return b;
}

BasisSystem BasisSystem::fourier(int size, double domain_end) {
  check_domain(domain_end);
  if (size < 1) throw Error(ErrorKind::Config, kModule, "Fourier basis needs at least one function");
  BasisSystem b;
  b.kind_ = BasisKind::Fourier;
  b.size_ = size;
  b.domain_end_ = domain_end;
  return b;
}

BasisSystem BasisSystem::legendre(int degree, double domain_end) {
  check_domain(domain_end);
  if (degree < 0) throw Error(ErrorKind::Config, kModule, "Legendre degree must be non-negative");
  BasisSystem b;
  b.kind_ = BasisKind::Legendre;
  b.size_ = degree + 1;
  b.order_ = degree + 1;
  b.domain_end_ = domain_end;
  return b;
}

BasisSystem make_bspline(int size, int order, double domain_end) {
  return BasisSystem::bspline(size, order, domain_end);
}

// de Boor's triangular recurrence (Piegl & Tiller A2.2) for the `order`
// non-zero functions at t.
void BasisSystem::bspline_row(double t, double* out) const {
  const int p = order_ - 1;
  const int n = size_;
  int span;
  if (t >= domain_end_) {
    span = n - 1;
  } else {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    span = static_cast<int>(it - knots_.begin()) - 1;
    span = std::clamp(span, p, n - 1);
  }
  std::vector<double> N(order_, 0.0), left(order_, 0.0), right(order_, 0.0);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom == 0.0 ? 0.0 : N[r] / denom;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  for (int j = 0; j < n; ++j) out[j] = 0.0;
  for (int j = 0; j <= p; ++j) out[span - p + j] = N[j];
}

Eigen::MatrixXd BasisSystem::evaluate(std::span<const double> grid) const {
  const double tol = 1e-9 * domain_end_;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), size_);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double t = grid[i];
    if (!(t >= -tol && t <= domain_end_ + tol))
      throw Error(ErrorKind::Domain, kModule,
                  "t = " + std::to_string(t) + " outside [0, " + std::to_string(domain_end_) + "]");
    t = std::clamp(t, 0.0, domain_end_);
    const auto row = static_cast<Eigen::Index>(i);
    switch (kind_) {
      case BasisKind::BSpline: {
        Eigen::RowVectorXd values(size_);
        bspline_row(t, values.data());
        out.row(row) = values;
        break;
      }
      case BasisKind::Fourier: {
        const double T = domain_end_;
        out(row, 0) = 1.0 / std::sqrt(T);
        const double amp = std::sqrt(2.0 / T);
        for (int k = 1; k < size_; ++k) {
          const int j = (k + 1) / 2;
          const double arg = 2.0 * M_PI * j * t / T;
          out(row, k) = amp * (k % 2 == 1 ? std::sin(arg) : std::cos(arg));
        }
        break;
      }
      case BasisKind::Legendre: {
        const double T = domain_end_;
        const double x = 2.0 * t / T - 1.0;
        double p_prev = 1.0, p_cur = x;
        for (int n = 0; n < size_; ++n) {
          double pn;
          if (n == 0) {
            pn = 1.0;
          } else if (n == 1) {
            pn = x;
          } else {
            pn = ((2.0 * n - 1.0) * x * p_cur - (n - 1.0) * p_prev) / n;
            p_prev = p_cur;
            p_cur = pn;
          }
          out(row, n) = std::sqrt((2.0 * n + 1.0) / T) * pn;
        }
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd eval_basis(const BasisSystem& basis, std::span<const double> grid) {
  return basis.evaluate(grid);
}

LeastSquaresFitter::LeastSquaresFitter(const BasisSystem& basis, std::span<const double> grid) {
  if (static_cast<int>(grid.size()) < basis.size())
    throw Error(ErrorKind::Numerical, kModule,
                "grid of " + std::to_string(grid.size()) + " points cannot determine " +
                    std::to_string(basis.size()) + " coefficients");
  const Eigen::MatrixXd design = basis.evaluate(grid);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < basis.size())
    throw Error(ErrorKind::Numerical, kModule,
                "design matrix is rank deficient for a basis of size " + std::to_string(basis.size()));
  solve_ = qr.solve(Eigen::MatrixXd::Identity(design.rows(), design.rows()));
}

Eigen::VectorXd LeastSquaresFitter::fit(const Eigen::Ref<const Eigen::VectorXd>& values) const {
  if (values.size() != solve_.cols())
    throw Error(ErrorKind::Shape, kModule, "curve length does not match the fitting grid");
  return solve_ * values;
}

Eigen::MatrixXd LeastSquaresFitter::fit_rows(const Eigen::Ref<const Eigen::MatrixXd>& values) const {
  if (values.cols() != solve_.cols())
    throw Error(ErrorKind::Shape, kModule, "curve length does not match the fitting grid");
  return values * solve_.transpose();
}

Eigen::VectorXd fit_coefficients(std::span<const double> values, std::span<const double> grid,
                                 const BasisSystem& basis) {
  if (values.size() != grid.size())
    throw Error(ErrorKind::Shape, kModule, "values and grid differ in length");
  if (static_cast<int>(grid.size()) < basis.size())
    throw Error(ErrorKind::Numerical, kModule,
                "too few points for a basis of size " + std::to_string(basis.size()));
  const Eigen::MatrixXd design = basis.evaluate(grid);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < basis.size())
    throw Error(ErrorKind::Numerical, kModule,
                "design matrix is rank deficient for a basis of size " + std::to_string(basis.size()));
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  return qr.solve(y);
}

Eigen::VectorXd simpson_weights(int points, double domain_end) {
  if (points < 3 || points % 2 == 0)
    throw Error(ErrorKind::Config, kModule, "Simpson quadrature needs an odd number (>= 3) of points");
  const double h = domain_end / (points - 1);
  Eigen::VectorXd w(points);
  for (int i = 0; i < points; ++i) w[i] = (i == 0 || i == points - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  return w * (h / 3.0);
}

Eigen::MatrixXd gram_matrix(const BasisSystem& basis, int quadrature_points) {
  const Eigen::VectorXd w = simpson_weights(quadrature_points, basis.domain_end());
  const std::vector<double> grid = uniform_grid(quadrature_points, basis.domain_end());
  const Eigen::MatrixXd phi = basis.evaluate(grid);
  Eigen::MatrixXd g = phi.transpose() * w.asDiagonal() * phi;
  return 0.5 * (g + g.transpose());
}

int CoefficientSet::total_size() const {
  int m = 0;
  for (const auto& d : layout) m += d.size;
  return m;
}

int CoefficientSet::offset(std::size_t dimension) const {
  int m = 0;
  for (std::size_t i = 0; i < dimension; ++i) m += layout[i].size;
  return m;
}

CoefficientSet average_by_group(const CoefficientSet& coeffs) {
  if (coeffs.keys.size() != static_cast<std::size_t>(coeffs.values.rows()))
    throw Error(ErrorKind::Shape, kModule, "coefficient rows and keys differ in count");
  if (coeffs.keys.empty()) throw Error(ErrorKind::Grouping, kModule, "no curves to average");
  std::map<std::pair<std::string, int>, int> index;
  std::vector<CurveKey> keys;
  std::vector<std::vector<Eigen::Index>> members;
  for (std::size_t r = 0; r < coeffs.keys.size(); ++r) {
    const auto& k = coeffs.keys[r];
    auto [it, inserted] = index.try_emplace({k.subject, static_cast<int>(k.side)}, static_cast<int>(keys.size()));
    if (inserted) {
      keys.push_back({k.subject, k.side, -1});
      members.emplace_back();
    }
    members[it->second].push_back(static_cast<Eigen::Index>(r));
  }
  CoefficientSet out;
  out.layout = coeffs.layout;
  out.keys = keys;
  out.values.resize(static_cast<Eigen::Index>(keys.size()), coeffs.values.cols());
  for (std::size_t g = 0; g < keys.size(); ++g) {
    if (members[g].empty()) throw Error(ErrorKind::Grouping, kModule, "empty group");
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(coeffs.values.cols());
    for (auto r : members[g]) sum += coeffs.values.row(r);
    out.values.row(static_cast<Eigen::Index>(g)) = sum / static_cast<double>(members[g].size());
  }
  return out;
}

SplitBasis::SplitBasis(BasisSystem univariate, int dimensions)
    : univariate_(std::move(univariate)), dimensions_(dimensions) {
  if (dimensions < 1) throw Error(ErrorKind::Config, kModule, "split basis needs at least one dimension");
}

Eigen::MatrixXd SplitBasis::evaluate(int dimension, std::span<const double> grid) const {
  if (dimension < 0 || dimension >= dimensions_)
    throw Error(ErrorKind::Domain, kModule, "split basis dimension out of range");
  const double T = segment_length();
  std::vector<double> shifted(grid.begin(), grid.end());
  for (double& t : shifted) {
    if (t < -1e-9 * T || t > T * (1 + 1e-9))
      throw Error(ErrorKind::Domain, kModule, "split basis evaluated outside [0, T]");
    t = std::clamp(t, 0.0, T) + dimension * T;
  }
  return univariate_.evaluate(shifted);
}

SplitBasis split_multivariate_basis(const BasisSystem& univariate, int dimensions) {
  if (dimensions < 1) throw Error(ErrorKind::Config, kModule, "split basis needs at least one dimension");
  // High-degree polynomials need a finer rule than the default to resolve 1e-6.
  const Eigen::MatrixXd g = gram_matrix(univariate, 20001);
  const double dev = (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-6)
    throw Error(ErrorKind::Config, kModule,
                "univariate basis is not orthonormal (Gram deviation " + std::to_string(dev) + ")");
  return SplitBasis(univariate, dimensions);
}

}  // namespace mvfmm
