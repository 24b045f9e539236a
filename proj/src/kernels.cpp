#include "mvfmm/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mvfmm/error.hpp"
#include "mvfmm/parallel.hpp"
#include "mvfmm/stats.hpp"

namespace mvfmm::kernels {

namespace {

constexpr int kRowBlock = 64;
constexpr int kSubjectBlock = 32;

void check_projection(const Eigen::MatrixXd& rows, const Eigen::VectorXd& centering,
                      const Eigen::MatrixXd& projection) {
  if (rows.cols() != projection.rows() || centering.size() != rows.cols())
    throw Error(ErrorKind::Shape, "kernels", "projection layout mismatch");
}

// One block of draws; shared by the serial and parallel paths.
void max_statistic_block(const Eigen::MatrixXd& basis, const Eigen::VectorXd& inv_se,
                         const Eigen::MatrixXd& factor, std::uint64_t seed, int block, int draws,
                         Eigen::VectorXd& out) {
  const int first = block * kDrawBlock;
  const int count = std::min(kDrawBlock, draws - first);
  auto rng = make_stream(seed, static_cast<std::uint64_t>(block), 0x5ca1ab1eULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd e(factor.cols(), count);
  for (int r = 0; r < count; ++r)
    for (Eigen::Index k = 0; k < e.rows(); ++k) e(k, r) = normal(rng);
  const Eigen::MatrixXd dev = basis * (factor * e);
  for (int r = 0; r < count; ++r) {
    double z = 0.0;
    for (Eigen::Index g = 0; g < dev.rows(); ++g) z = std::max(z, std::abs(dev(g, r)) * inv_se[g]);
    out[first + r] = z;
  }
}

void accumulate_subjects(const Eigen::MatrixXd& rows, const std::vector<std::vector<Eigen::Index>>& members,
                         int begin, int end, MomentSums& acc) {
  Eigen::VectorXd sum(rows.cols());
  for (int i = begin; i < end; ++i) {
    sum.setZero();
    for (auto r : members[static_cast<std::size_t>(i)]) {
      sum += rows.row(r).transpose();
      acc.row_outer.selfadjointView<Eigen::Lower>().rankUpdate(rows.row(r).transpose());
    }
    acc.subject_outer.selfadjointView<Eigen::Lower>().rankUpdate(sum);
    const double n = static_cast<double>(members[static_cast<std::size_t>(i)].size());
    acc.sum_squared_sizes += n * n;
    acc.rows += n;
  }
}

MomentSums zero_sums(Eigen::Index m) {
  MomentSums s;
  s.subject_outer = Eigen::MatrixXd::Zero(m, m);
  s.row_outer = Eigen::MatrixXd::Zero(m, m);
  return s;
}

void finish(MomentSums& s) {
  s.subject_outer = s.subject_outer.selfadjointView<Eigen::Lower>();
  s.row_outer = s.row_outer.selfadjointView<Eigen::Lower>();
}

std::vector<std::vector<Eigen::Index>> group_members(std::span<const int> groups, int n_groups,
                                                     Eigen::Index n_rows) {
  if (static_cast<Eigen::Index>(groups.size()) != n_rows)
    throw Error(ErrorKind::Shape, "kernels", "group vector length differs from row count");
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_groups));
  for (std::size_t r = 0; r < groups.size(); ++r) {
    if (groups[r] < 0 || groups[r] >= n_groups) throw Error(ErrorKind::Shape, "kernels", "group id out of range");
    members[static_cast<std::size_t>(groups[r])].push_back(static_cast<Eigen::Index>(r));
  }
  return members;
}

}  // namespace

Eigen::MatrixXd project_rows_serial(const Eigen::MatrixXd& rows, const Eigen::VectorXd& centering,
                                    const Eigen::MatrixXd& projection) {
  check_projection(rows, centering, projection);
  Eigen::MatrixXd out(rows.rows(), projection.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index k = 0; k < projection.cols(); ++k) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < rows.cols(); ++m) acc += (rows(i, m) - centering[m]) * projection(m, k);
      out(i, k) = acc;
    }
  return out;
}

Eigen::MatrixXd project_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& centering,
                             const Eigen::MatrixXd& projection, int threads) {
  check_projection(rows, centering, projection);
  Eigen::MatrixXd out(rows.rows(), projection.cols());
  const Eigen::Index n = rows.rows();
  const Eigen::Index blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index first = b * kRowBlock;
    const Eigen::Index count = std::min<Eigen::Index>(kRowBlock, n - first);
    out.middleRows(first, count).noalias() =
        (rows.middleRows(first, count).rowwise() - centering.transpose()) * projection;
  }
  return out;
}

Eigen::VectorXd max_statistic_serial(const Eigen::MatrixXd& basis, const Eigen::VectorXd& inv_se,
                                     const Eigen::MatrixXd& factor, std::uint64_t seed, int draws) {
  Eigen::VectorXd out(draws);
  const int blocks = (draws + kDrawBlock - 1) / kDrawBlock;
  for (int b = 0; b < blocks; ++b) max_statistic_block(basis, inv_se, factor, seed, b, draws, out);
  return out;
}

Eigen::VectorXd max_statistic(const Eigen::MatrixXd& basis, const Eigen::VectorXd& inv_se,
                              const Eigen::MatrixXd& factor, std::uint64_t seed, int draws, int threads) {
  if (basis.cols() != factor.rows() || basis.rows() != inv_se.size())
    throw Error(ErrorKind::Shape, "kernels", "max statistic operand mismatch");
  Eigen::VectorXd out(draws);
  const int blocks = (draws + kDrawBlock - 1) / kDrawBlock;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (int b = 0; b < blocks; ++b) max_statistic_block(basis, inv_se, factor, seed, b, draws, out);
  return out;
}

MomentSums moment_sums_serial(const Eigen::MatrixXd& rows, std::span<const int> groups, int n_groups) {
  const auto members = group_members(groups, n_groups, rows.rows());
  MomentSums acc = zero_sums(rows.cols());
  for (int i = 0; i < n_groups; ++i) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows.cols());
    for (auto r : members[static_cast<std::size_t>(i)]) {
      sum += rows.row(r).transpose();
      acc.row_outer += rows.row(r).transpose() * rows.row(r);
    }
    acc.subject_outer += sum * sum.transpose();
    const double n = static_cast<double>(members[static_cast<std::size_t>(i)].size());
    acc.sum_squared_sizes += n * n;
    acc.rows += n;
  }
  return acc;
}

MomentSums moment_sums(const Eigen::MatrixXd& rows, std::span<const int> groups, int n_groups, int threads) {
  const auto members = group_members(groups, n_groups, rows.rows());
  const int blocks = (n_groups + kSubjectBlock - 1) / kSubjectBlock;
  std::vector<MomentSums> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (int b = 0; b < blocks; ++b) {
    MomentSums acc = zero_sums(rows.cols());
    accumulate_subjects(rows, members, b * kSubjectBlock, std::min(n_groups, (b + 1) * kSubjectBlock), acc);
    partial[static_cast<std::size_t>(b)] = std::move(acc);
  }
  MomentSums total = zero_sums(rows.cols());
  for (const auto& p : partial) {
    total.subject_outer += p.subject_outer;
    total.row_outer += p.row_outer;
    total.sum_squared_sizes += p.sum_squared_sizes;
    total.rows += p.rows;
  }
  finish(total);
  return total;
}

}  // namespace mvfmm::kernels
