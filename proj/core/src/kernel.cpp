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
#include "geoflow/kernel.hpp"

#include <cmath>

namespace geoflow {

void KernelSpec::validate() const {
  if (components.empty())
    throw Error("bad_kernel", "kernel needs at least one Gaussian component");
  double sum = 0.0;
  for (const auto& c : components) {
    if (!(c.sigma > 0.0))
      throw Error("bad_kernel", "kernel sigma must be positive");
    if (c.weight < 0.0)
      throw Error("bad_kernel", "kernel weights must be nonnegative");
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error("bad_kernel", "kernel weights must sum to 1");
}

KernelSpec KernelSpec::default_for(const GridSpec& grid) {
  const double extent = grid.max_extent();
  return multi({0.05 * extent, 0.10 * extent, 0.15 * extent},
               {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
}

KernelSpec KernelSpec::single(double sigma) {
  KernelSpec k;
  k.components.push_back({sigma, 1.0});
  return k;
}

KernelSpec KernelSpec::multi(const std::vector<double>& sigmas,
                             const std::vector<double>& weights) {
  if (sigmas.size() != weights.size())
    throw Error("bad_kernel", "sigma and weight counts differ");
  KernelSpec k;
  for (std::size_t i = 0; i < sigmas.size(); ++i)
    k.components.push_back({sigmas[i], weights[i]});
  // normalize exactly so hand-written weight lists are forgiving
  double sum = 0.0;
  for (const auto& c : k.components) sum += c.weight;
  if (sum > 0.0)
    for (auto& c : k.components) c.weight /= sum;
  k.validate();
  return k;
}

namespace detail {

std::vector<double> gaussian_taps(double sigma_voxels) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_voxels)));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double t = std::exp(-0.5 * (k / sigma_voxels) * (k / sigma_voxels));
    taps[k + radius] = t;
    sum += t;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Half-sample reflection into [0, n-1]: -1 -> 0, n -> n-1. This
// extension keeps constants exact and makes the operator self-adjoint
// in the unweighted discrete pairing (it diagonalizes in DCT-II).
static inline int fold(int j, int n) {
  while (j < 0 || j > n - 1) {
    if (j < 0) j = -j - 1;
    if (j > n - 1) j = 2 * n - 1 - j;
  }
  return j;
}

static void convolve_line(const double* in, double* out, int n,
                          const std::vector<double>& taps) {
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  const double* g = taps.data() + radius;  // g[-R..R]
  const int lo = std::min(radius, n);
  const int hi = std::max(lo, n - radius);
  for (int i = 0; i < lo; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) acc += g[k] * in[fold(i - k, n)];
    out[i] = acc;
  }
  for (int i = lo; i < hi; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) acc += g[k] * in[i - k];
    out[i] = acc;
  }
  for (int i = hi; i < n; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) acc += g[k] * in[fold(i - k, n)];
    out[i] = acc;
  }
}

// One separable Gaussian pass over every component of an interleaved field.
static void separable_gaussian(const GridSpec& grid, int ncomp, double sigma_mm,
                               std::vector<double>& data) {
  std::vector<double> line, conv;
  for (int axis = 0; axis < grid.dim; ++axis) {
    const int n = grid.dims[axis];
    const auto taps = gaussian_taps(sigma_mm / grid.spacing[axis]);
    line.resize(n);
    conv.resize(n);
    const std::size_t stride_pts[3] = {
        1, static_cast<std::size_t>(grid.dims[0]),
        static_cast<std::size_t>(grid.dims[0]) * grid.dims[1]};
    const std::size_t s = stride_pts[axis] * ncomp;
    // iterate over all lines orthogonal to `axis`
    const int oa = axis == 0 ? 1 : 0;
    const int ob = axis == 2 ? 1 : 2;
    for (int b = 0; b < grid.dims[ob]; ++b)
      for (int a = 0; a < grid.dims[oa]; ++a) {
        std::size_t base_pt = stride_pts[oa] * a + stride_pts[ob] * b;
        for (int c = 0; c < ncomp; ++c) {
          const std::size_t base = base_pt * ncomp + c;
          for (int i = 0; i < n; ++i) line[i] = data[base + s * i];
          convolve_line(line.data(), conv.data(), n, taps);
          for (int i = 0; i < n; ++i) data[base + s * i] = conv[i];
        }
      }
  }
}

}  // namespace detail

VectorField smooth(const VectorField& m, const KernelSpec& k) {
  k.validate();
  VectorField out(m.grid, m.ncomp);
  std::vector<double> work;
  for (const auto& comp : k.components) {
    if (comp.weight == 0.0) continue;
    work = m.data;
    detail::separable_gaussian(m.grid, m.ncomp, comp.sigma, work);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += comp.weight * work[i];
  }
  return out;
}

double inner_product(const VectorField& m, const VectorField& v) {
  if (!(m.grid == v.grid) || m.ncomp != v.ncomp)
    throw Error("grid_mismatch", "inner_product needs matching fields");
  double acc = 0.0;
  for (std::size_t i = 0; i < m.data.size(); ++i) acc += m.data[i] * v.data[i];
  return acc * m.grid.voxel_volume();
}

}  // namespace geoflow
