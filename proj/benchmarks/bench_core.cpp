/*=========================================================================
 *
 *  Copyright the geoflow project contributors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *         http://www.apache.org/licenses/LICENSE-2.0.txt
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 *
 *=========================================================================*/

// Micro-benchmarks for the hot inner kernels: smoothing, interpolation,
// map composition, Jacobians and full geodesic shooting.

#include <benchmark/benchmark.h>

#include <cmath>

#include "geoflow/kernel.hpp"
#include "geoflow/registration.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/shooting.hpp"

namespace {

using namespace geoflow;

GridSpec grid_for(int n) { return GridSpec::make2d(n, n); }

/// Smooth band-limited momentum with a deterministic seed; peak amplitude
/// is scaled so shooting stays comfortably diffeomorphic.
VectorField bench_momentum(const GridSpec& g, double amplitude) {
  VectorField raw(g, g.dim);
  Rng rng(91);
  for (double& v : raw.data) v = rng.normal();
  VectorField m = smooth(raw, KernelSpec::default_for(g));
  double peak = 0.0;
  for (double v : m.data) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : m.data) v *= amplitude / peak;
  return m;
}

ScalarField bench_image(const GridSpec& g) {
  ScalarField img(g, 0.0);
  for (int y = 0; y < g.dims[1]; ++y)
    for (int x = 0; x < g.dims[0]; ++x)
      img.at(x, y) = std::sin(0.3 * x) * std::cos(0.2 * y);
  return img;
}

void BM_Smooth(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const KernelSpec k = KernelSpec::default_for(g);
  VectorField m(g, g.dim);
  Rng rng(7);
  for (double& v : m.data) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(smooth(m, k));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(g.num_points()));
}
BENCHMARK(BM_Smooth)->Arg(64)->Arg(128);

void BM_Interpolate(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const ScalarField img = bench_image(g);
  const VectorField m = bench_momentum(g, 1.0);
  const DeformationMap map = shoot(m, 1.0, ShootConfig{}).phi_inv;
  for (auto _ : state) benchmark::DoNotOptimize(interpolate(img, map));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(g.num_points()));
}
BENCHMARK(BM_Interpolate)->Arg(64)->Arg(128);

void BM_ComposeMaps(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const GeodesicState st = shoot(bench_momentum(g, 1.0), 1.0, ShootConfig{});
  for (auto _ : state)
    benchmark::DoNotOptimize(compose_maps(st.phi, st.phi_inv));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(g.num_points()));
}
BENCHMARK(BM_ComposeMaps)->Arg(64)->Arg(128);

void BM_JacobianDeterminant(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const DeformationMap map =
      shoot(bench_momentum(g, 1.0), 1.0, ShootConfig{}).phi_inv;
  for (auto _ : state)
    benchmark::DoNotOptimize(jacobian_determinant(map));
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(g.num_points()));
}
BENCHMARK(BM_JacobianDeterminant)->Arg(64)->Arg(128);

void BM_Shoot(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const VectorField m = bench_momentum(g, 1.0);
  ShootConfig cfg;
  cfg.kernel = KernelSpec::default_for(g);
  for (auto _ : state) benchmark::DoNotOptimize(shoot(m, 1.0, cfg));
}
BENCHMARK(BM_Shoot)->Arg(32)->Arg(64);

void BM_EnergyGradient(benchmark::State& state) {
  const GridSpec g = grid_for(static_cast<int>(state.range(0)));
  const ScalarField i0 = bench_image(g);
  ScalarField i1 = i0;
  for (double& v : i1.values) v = 0.9 * v + 0.05;
  const VectorField m = bench_momentum(g, 0.5);
  RegConfig cfg;
  cfg.shoot.kernel = KernelSpec::default_for(g);
  for (auto _ : state)
    benchmark::DoNotOptimize(energy_gradient(m, i0, i1, cfg));
}
BENCHMARK(BM_EnergyGradient)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
