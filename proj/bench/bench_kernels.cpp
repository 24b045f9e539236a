// Serial reference vs OpenMP kernels. Arg(0) is the serial reference,
// Arg(n) the parallel kernel on n threads (0 in the library means all).

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "mvfmm/kernels.hpp"

namespace {

using namespace mvfmm::kernels;

Eigen::MatrixXd normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

void BM_ProjectRows(benchmark::State& state) {
  const Eigen::MatrixXd rows = normal(560, 160, 1);
  const Eigen::VectorXd centre = normal(160, 1, 2).col(0);
  const Eigen::MatrixXd proj = normal(160, 13, 3);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Eigen::MatrixXd out = threads ? project_rows(rows, centre, proj, threads) : project_rows_serial(rows, centre, proj);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_MaxStatistic(benchmark::State& state) {
  const Eigen::MatrixXd basis = normal(202, 13, 4);
  const Eigen::VectorXd inv_se = Eigen::VectorXd::Ones(202);
  const Eigen::MatrixXd factor = normal(13, 13, 5);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Eigen::VectorXd z = threads ? max_statistic(basis, inv_se, factor, 7, 2000, threads)
                                : max_statistic_serial(basis, inv_se, factor, 7, 2000);
    benchmark::DoNotOptimize(z.data());
  }
}

void BM_MomentSums(benchmark::State& state) {
  const Eigen::MatrixXd rows = normal(560, 160, 6);
  std::vector<int> groups(560);
  for (int i = 0; i < 560; ++i) groups[static_cast<std::size_t>(i)] = i / 2;
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    MomentSums m = threads ? moment_sums(rows, groups, 280, threads) : moment_sums_serial(rows, groups, 280);
    benchmark::DoNotOptimize(m.row_outer.data());
  }
}

}  // namespace

BENCHMARK(BM_ProjectRows)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxStatistic)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MomentSums)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
