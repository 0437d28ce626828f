#include <benchmark/benchmark.h>

#include <vector>

#include "sphcov/estimators.hpp"
#include "sphcov/gram.hpp"
#include "sphcov/postprocess.hpp"
#include "sphcov/simulation.hpp"

using namespace sphcov;

namespace {

SourceModel bench_model() {
  return make_source_model(sample_uniform_sphere(5, 20210),
                           default_weight_cov(), matern_zonal(2.5, 0.4));
}

std::vector<std::vector<SphericalPoint>> bench_locations(int n, int r) {
  const Dataset data = simulate_dataset(bench_model(), n, r, 0.1, 1);
  std::vector<std::vector<SphericalPoint>> locs;
  for (const auto& rep : data.replicates) locs.push_back(rep.locations);
  return locs;
}

void BM_BuildJ(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto locs = bench_locations(n, 12);
  const ZonalKernel k = matern_zonal(2.5, 0.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_J(locs, k, 0.01));
  }
}
BENCHMARK(BM_BuildJ)->Arg(16)->Arg(32)->Arg(64);

void BM_BuildHSparse(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto locs = bench_locations(n, 12);
  const SparseMatrix j = build_J(locs, matern_zonal(2.5, 0.4), 0.01);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_H_sparse(j, {n, 12}));
  }
}
BENCHMARK(BM_BuildHSparse)->Arg(16)->Arg(32)->Arg(64);

void BM_SparseMatvec(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto locs = bench_locations(n, 12);
  const SparseMatrix h =
      build_H_sparse(build_J(locs, matern_zonal(2.5, 0.4), 0.01), {n, 12});
  const Eigen::VectorXd x = Eigen::VectorXd::Random(h.rows);
  Eigen::VectorXd y;
  for (auto _ : state) {
    h.multiply(x, y);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_SparseMatvec)->Arg(16)->Arg(32)->Arg(64);

void BM_KhatriRaoApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto locs = bench_locations(n, 12);
  KhatriRaoOperator op(
      build_kernel_matrix_dense(locs, matern_zonal(2.5, 0.4), 0.01), n, 12, 0);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(op.dim());
  Eigen::VectorXd y;
  for (auto _ : state) {
    op.apply(x, y);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_KhatriRaoApply)->Arg(16)->Arg(32)->Arg(64);

void BM_FitSecondMoment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SourceModel model = bench_model();
  const Dataset data = simulate_dataset(model, n, 12, 0.1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_second_moment(data, model.kernel, 2.363));
  }
}
BENCHMARK(BM_FitSecondMoment)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GridEval(benchmark::State& state) {
  const SourceModel model = bench_model();
  const Dataset data = simulate_dataset(model, 32, 12, 0.1, 1);
  const SecondMomentEstimate est = fit_second_moment(data, model.kernel, 2.0);
  const SphereGrid grid = fibonacci_grid(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_on_grid(est, grid));
  }
}
BENCHMARK(BM_GridEval)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
