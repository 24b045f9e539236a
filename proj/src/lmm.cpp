#include "mvfmm/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvfmm/error.hpp"

namespace mvfmm {

namespace {
constexpr const char* kModule = "lmm";
constexpr double kGolden = 0.6180339887498949;
constexpr int kScanPoints = 40;
constexpr double kPolishWidth = 1e-6;
}  // namespace

struct RemlProblem::ResponseStats {
  double yty = 0;
  Eigen::VectorXd xty;
  std::vector<double> sy_sq;           // per size class: sum (sum y)^2
  std::vector<Eigen::VectorXd> sx_sy;  // per size class: sum (sum x)(sum y)
};

RemlProblem::RemlProblem(Eigen::MatrixXd X, std::vector<int> groups) : X_(std::move(X)), groups_(std::move(groups)) {
  const Eigen::Index n = X_.rows();
  const Eigen::Index p = X_.cols();
  if (static_cast<Eigen::Index>(groups_.size()) != n)
    throw Error(ErrorKind::Design, kModule, "group vector length differs from the number of rows");
  if (n <= p) throw Error(ErrorKind::Design, kModule, "need more observations than fixed effects");
  if (!X_.allFinite()) throw Error(ErrorKind::Design, kModule, "design matrix has non-finite entries");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X_);
  if (qr.rank() < p)
    throw Error(ErrorKind::Design, kModule,
                "fixed-effects design is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(p) + ")");

  n_groups_ = 0;
  for (int g : groups_) {
    if (g < 0) throw Error(ErrorKind::Design, kModule, "negative group id");
    n_groups_ = std::max(n_groups_, g + 1);
  }
  group_size_.assign(static_cast<std::size_t>(n_groups_), 0);
  for (int g : groups_) ++group_size_[static_cast<std::size_t>(g)];

  Eigen::MatrixXd sx = Eigen::MatrixXd::Zero(p, n_groups_);
  for (Eigen::Index i = 0; i < n; ++i) sx.col(groups_[static_cast<std::size_t>(i)]) += X_.row(i).transpose();

  std::map<int, int> class_index;
  class_of_group_.assign(static_cast<std::size_t>(n_groups_), -1);
  for (int g = 0; g < n_groups_; ++g) {
    const int size = group_size_[static_cast<std::size_t>(g)];
    if (size == 0) continue;  // unused id
    auto [it, inserted] = class_index.try_emplace(size, static_cast<int>(classes_.size()));
    if (inserted) classes_.push_back({static_cast<double>(size), 0.0, Eigen::MatrixXd::Zero(p, p)});
    SizeClass& c = classes_[static_cast<std::size_t>(it->second)];
    c.count += 1;
    c.sx_outer.noalias() += sx.col(g) * sx.col(g).transpose();
    class_of_group_[static_cast<std::size_t>(g)] = it->second;
  }
  xtx_ = X_.transpose() * X_;
}

RemlProblem::ResponseStats RemlProblem::response_stats(const Eigen::VectorXd& y) const {
  if (y.size() != X_.rows()) throw Error(ErrorKind::Design, kModule, "response length differs from design");
  if (!y.allFinite()) throw Error(ErrorKind::Numerical, kModule, "response has non-finite entries");
  ResponseStats s;
  s.yty = y.squaredNorm();
  s.xty = X_.transpose() * y;
  std::vector<double> sy(static_cast<std::size_t>(n_groups_), 0.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) sy[static_cast<std::size_t>(groups_[static_cast<std::size_t>(i)])] += y[i];
  Eigen::MatrixXd sx = Eigen::MatrixXd::Zero(p(), n_groups_);
  for (Eigen::Index i = 0; i < y.size(); ++i) sx.col(groups_[static_cast<std::size_t>(i)]) += X_.row(i).transpose();
  s.sy_sq.assign(classes_.size(), 0.0);
  s.sx_sy.assign(classes_.size(), Eigen::VectorXd::Zero(p()));
  for (int g = 0; g < n_groups_; ++g) {
    const int c = class_of_group_[static_cast<std::size_t>(g)];
    if (c < 0) continue;
    const double v = sy[static_cast<std::size_t>(g)];
    s.sy_sq[static_cast<std::size_t>(c)] += v * v;
    s.sx_sy[static_cast<std::size_t>(c)] += sx.col(g) * v;
  }
  return s;
}

double RemlProblem::evaluate(const ResponseStats& st, double lambda, Eigen::VectorXd* beta,
                             Eigen::MatrixXd* xvx_inv, double* rss) const {
  // V_i^{-1} = I - c_i J with c_i = lambda / (1 + lambda n_i).
  const double n = static_cast<double>(X_.rows());
  const double pp = static_cast<double>(X_.cols());
  Eigen::MatrixXd xvx = xtx_;
  Eigen::VectorXd xvy = st.xty;
  double yvy = st.yty;
  double logdet_v = 0.0;
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const auto& c = classes_[k];
    const double ci = lambda / (1.0 + lambda * c.size);
    xvx.noalias() -= ci * c.sx_outer;
    xvy.noalias() -= ci * st.sx_sy[k];
    yvy -= ci * st.sy_sq[k];
    logdet_v += c.count * std::log1p(lambda * c.size);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(xvx);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd b = llt.solve(xvy);
  const double r = yvy - xvy.dot(b);
  double logdet_x = 0.0;
  for (Eigen::Index i = 0; i < xvx.rows(); ++i) logdet_x += 2.0 * std::log(llt.matrixL()(i, i));
  if (beta) *beta = b;
  if (xvx_inv) *xvx_inv = llt.solve(Eigen::MatrixXd::Identity(xvx.rows(), xvx.cols()));
  if (rss) *rss = r;
  if (!(r > 0)) return -std::numeric_limits<double>::infinity();
  return -0.5 * (logdet_v + (n - pp) * std::log(r) + logdet_x);
}

double RemlProblem::slope(const ResponseStats& st, double lambda) const {
  const double n = static_cast<double>(X_.rows());
  const double pp = static_cast<double>(X_.cols());
  Eigen::MatrixXd xvx = xtx_;
  Eigen::MatrixXd dxvx = Eigen::MatrixXd::Zero(p(), p());
  Eigen::VectorXd xvy = st.xty;
  double yvy = st.yty;
  double dlogdet_v = 0.0;
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const auto& c = classes_[k];
    const double ci = lambda / (1.0 + lambda * c.size);
    xvx.noalias() -= ci * c.sx_outer;
    dxvx.noalias() -= c.sx_outer / ((1.0 + lambda * c.size) * (1.0 + lambda * c.size));
    xvy.noalias() -= ci * st.sx_sy[k];
    yvy -= ci * st.sy_sq[k];
    dlogdet_v += c.count * c.size / (1.0 + lambda * c.size);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(xvx);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd b = llt.solve(xvy);
  const double r = yvy - xvy.dot(b);
  // d r / d lambda = -sum_g (sum of V^{-1} residual over g)^2.
  double dr = 0.0;
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const auto& c = classes_[k];
    const double w = 1.0 / ((1.0 + lambda * c.size) * (1.0 + lambda * c.size));
    dr -= w * (st.sy_sq[k] - 2.0 * b.dot(st.sx_sy[k]) + b.dot(c.sx_outer * b));
  }
  const double dlogdet_x = llt.solve(dxvx).trace();
  return -0.5 * (dlogdet_v + (n - pp) * dr / r + dlogdet_x);
}

double RemlProblem::profile_loglik(const Eigen::VectorXd& y, double lambda) const {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Domain, kModule, "lambda must be non-negative");
  const double v = evaluate(response_stats(y), lambda, nullptr, nullptr, nullptr);
  if (!std::isfinite(v)) throw Error(ErrorKind::Numerical, kModule, "restricted likelihood is not finite");
  return v;
}

LmmFit RemlProblem::fit(const Eigen::VectorXd& y, const RemlOptions& options) const {
  const ResponseStats st = response_stats(y);
  const double u_max = std::log1p(options.lambda_max);
  auto f = [&](double u) { return evaluate(st, std::expm1(u), nullptr, nullptr, nullptr); };

  // Coarse scan to bracket the global maximum, then golden section.
  int best = 0;
  std::vector<double> scan(kScanPoints + 1);
  for (int i = 0; i <= kScanPoints; ++i) {
    scan[static_cast<std::size_t>(i)] = f(u_max * i / kScanPoints);
    if (scan[static_cast<std::size_t>(i)] > scan[static_cast<std::size_t>(best)]) best = i;
  }
  if (!std::isfinite(scan[static_cast<std::size_t>(best)]))
    throw Error(ErrorKind::Numerical, kModule, "restricted likelihood is not finite anywhere on [0, lambda_max]");
  double lo = u_max * std::max(0, best - 1) / kScanPoints;
  double hi = u_max * std::min(kScanPoints, best + 1) / kScanPoints;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  int iter = 0;
  while (hi - lo > options.tolerance && iter < options.max_iterations) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = f(x2);
    }
    ++iter;
  }
  double u_hat = 0.5 * (lo + hi);
  double f_hat = f(u_hat);

  // Golden section only resolves u to about sqrt(machine epsilon) because it
  // compares function values; finish on the sign change of the slope.
  if (u_hat > 0 && u_hat < u_max) {
    double a = std::expm1(std::max(0.0, u_hat - kPolishWidth));
    double b = std::expm1(std::min(u_max, u_hat + kPolishWidth));
    double ga = slope(st, a), gb = slope(st, b);
    if (ga > 0 && gb < 0) {
      int side = 0;
      for (int i = 0; i < 100 && b - a > 4 * std::numeric_limits<double>::epsilon() * b; ++i) {
        const double c = (a * gb - b * ga) / (gb - ga);
        const double gc = slope(st, c);
        if (!std::isfinite(gc) || gc == 0) {
          a = b = c;
          break;
        }
        if (gc > 0) {
          a = c;
          ga = gc;
          if (side == 1) gb *= 0.5;
          side = 1;
        } else {
          b = c;
          gb = gc;
          if (side == -1) ga *= 0.5;
          side = -1;
        }
      }
      const double u_root = std::log1p(0.5 * (a + b));
      const double f_root = f(u_root);
      if (f_root >= f_hat - 1e-12 * std::max(1.0, std::abs(f_hat))) {
        u_hat = u_root;
        f_hat = f_root;
      }
    }
  }

  LmmFit out;
  out.converged = hi - lo <= options.tolerance;
  // Boundary: prefer lambda = 0 on ties (flat likelihood with singleton groups).
  const double f0 = f(0.0);
  const double tie = 1e-12 * std::max(1.0, std::abs(f0));
  if (f0 >= f_hat - tie) {
    u_hat = 0.0;
    f_hat = f0;
    out.boundary = true;
  }
  const double f_top = f(u_max);
  if (f_top > f_hat) {
    u_hat = u_max;
    f_hat = f_top;
  }
  out.at_upper = u_hat >= u_max - options.tolerance;
  out.lambda = out.boundary ? 0.0 : std::expm1(u_hat);

  Eigen::MatrixXd xvx_inv;
  double rss = 0;
  out.reml_value = evaluate(st, out.lambda, &out.beta, &xvx_inv, &rss);
  if (!std::isfinite(out.reml_value) || !(rss > 0))
    throw Error(ErrorKind::Numerical, kModule, "restricted likelihood is not finite at the optimum");
  const double df = static_cast<double>(n() - p());
  out.s = rss / df;
  out.q = out.lambda * out.s;
  out.beta_cov = out.s * xvx_inv;
  out.beta_cov = 0.5 * (out.beta_cov + out.beta_cov.transpose());
  return out;
}

LmmFit reml_fit(const LmmDesign& design, const RemlOptions& options) {
  return RemlProblem(design.X, design.groups).fit(design.response, options);
}

double profile_loglik(const LmmDesign& design, double lambda) {
  return RemlProblem(design.X, design.groups).profile_loglik(design.response, lambda);
}

Eigen::VectorXd fitted_blups(const LmmFit& fit, const LmmDesign& design) {
  int n_groups = 0;
  for (int g : design.groups) n_groups = std::max(n_groups, g + 1);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_groups);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(n_groups);
  const Eigen::VectorXd resid = design.response - design.X * fit.beta;
  for (std::size_t i = 0; i < design.groups.size(); ++i) {
    sum[design.groups[i]] += resid[static_cast<Eigen::Index>(i)];
    count[design.groups[i]] += 1;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    if (count[g] == 0) continue;
    const double shrink = fit.lambda * count[g] / (1.0 + fit.lambda * count[g]);
    out[g] = shrink * sum[g] / count[g];
  }
  return out;
}

}  // namespace mvfmm
