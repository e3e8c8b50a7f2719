#include <benchmark/benchmark.h>

#include "foliated/verify.hpp"

using namespace foliated;

namespace {

const Geometry& su2() {
  static Geometry g = Geometry::build(GroupModel::su2_hopf());
  return g;
}
const Geometry& heis() {
  static Geometry g = Geometry::build(GroupModel::heisenberg(1));
  return g;
}

constexpr int kN = 512;
constexpr double kDt = 1.0 / kN;

void bm_build_geometry(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Geometry::build(GroupModel::su2_hopf()));
}
BENCHMARK(bm_build_geometry);

void bm_simulate_su2(benchmark::State& state) {
  uint64_t p = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), kN, kDt, 1, p++));
}
BENCHMARK(bm_simulate_su2);

void bm_simulate_heisenberg(benchmark::State& state) {
  uint64_t p = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_horizontal_bm(heis().model, heis().bott,
                                                    heis().model.identity(), kN, kDt, 1, p++,
                                                    Scheme::heisenberg_exact));
}
BENCHMARK(bm_simulate_heisenberg);

void bm_transports_su2(benchmark::State& state) {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), kN, kDt, 1, 0);
  for (auto _ : state) {
    bott_transport(path, su2().bott);
    damped_transport(path, su2(), 1.0);
  }
}
BENCHMARK(bm_transports_su2);

void bm_tangent_su2(benchmark::State& state) {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), kN, kDt, 1, 0);
  bott_transport(path, su2().bott);
  const auto hs = default_cm_paths(su2().model.n);
  for (auto _ : state) benchmark::DoNotOptimize(make_tangent_processes(path, su2(), hs));
}
BENCHMARK(bm_tangent_su2);

void bm_p_decomposition_su2(benchmark::State& state) {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), kN, kDt, 1, 0);
  bott_transport(path, su2().bott);
  const auto hs = default_cm_paths(su2().model.n);
  const TangentProcess v = make_tangent_process(path, su2(), hs[0]);
  for (auto _ : state)
    benchmark::DoNotOptimize(p_decomposition(path, su2(), hs[0], v, DChoice::bott()));
}
BENCHMARK(bm_p_decomposition_su2);

void bm_damped_derivative_su2(benchmark::State& state) {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), kN, kDt, 1, 0);
  bott_transport(path, su2().bott);
  damped_transport(path, su2(), 1.0);
  const CylinderFunction F = default_cylinder_functions(su2().model)[1];
  for (auto _ : state)
    benchmark::DoNotOptimize(damped_malliavin_derivative(F, path, su2().model));
}
BENCHMARK(bm_damped_derivative_su2);

}  // namespace

BENCHMARK_MAIN();
