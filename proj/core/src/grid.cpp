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
#include "geoflow/grid.hpp"

#include <algorithm>
#include <cmath>

namespace geoflow {

GridSpec GridSpec::make2d(int nx, int ny, double hx, double hy, double ox,
                          double oy) {
  GridSpec g;
  g.dim = 2;
  g.dims = {nx, ny, 1};
  g.spacing = {hx, hy, 1.0};
  g.origin = {ox, oy, 0.0};
  g.validate();
  return g;
}

GridSpec GridSpec::make3d(int nx, int ny, int nz, double hx, double hy,
                          double hz, double ox, double oy, double oz) {
  GridSpec g;
  g.dim = 3;
  g.dims = {nx, ny, nz};
  g.spacing = {hx, hy, hz};
  g.origin = {ox, oy, oz};
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (dim != 2 && dim != 3)
    throw Error("bad_grid", "grid dimensionality must be 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (dims[a] < 2)
      throw Error("bad_grid", "grid needs at least 2 points per axis");
    if (!(spacing[a] > 0.0))
      throw Error("bad_grid", "grid spacing must be positive");
  }
  if (dim == 2 && dims[2] != 1)
    throw Error("bad_grid", "2D grid must have dims[2] == 1");
}

DeformationMap identity_map(const GridSpec& grid) {
  grid.validate();
  DeformationMap map(grid);
  const int d = grid.dim;
  std::size_t p = 0;
  for (int z = 0; z < grid.dims[2]; ++z)
    for (int y = 0; y < grid.dims[1]; ++y)
      for (int x = 0; x < grid.dims[0]; ++x, ++p) {
        const int idx[3] = {x, y, z};
        for (int c = 0; c < d; ++c)
          map.coords[p * d + c] = grid.origin[c] + idx[c] * grid.spacing[c];
      }
  return map;
}

namespace detail {

struct CellCoords {
  int i0[3];     // lower corner index per axis
  double f[3];   // fractional offset in [0,1]
  bool clamped[3];
};

static inline CellCoords locate(const GridSpec& g, const double* p) {
  CellCoords c;
  for (int a = 0; a < 3; ++a) {
    const int n = g.dims[a];
    if (a >= g.dim || n == 1) {
      c.i0[a] = 0;
      c.f[a] = 0.0;
      c.clamped[a] = true;
      continue;
    }
    double u = (p[a] - g.origin[a]) / g.spacing[a];
    bool cl = false;
    if (!(u > 0.0)) {  // also catches NaN queries
      u = 0.0;
      cl = true;
    } else if (u >= n - 1) {
      u = n - 1;
      cl = true;
    }
    int i0 = static_cast<int>(std::floor(u));
    if (i0 > n - 2) i0 = n - 2;
    c.i0[a] = i0;
    c.f[a] = u - i0;
    c.clamped[a] = cl;
  }
  return c;
}

void sample(const GridSpec& g, const double* data, int ncomp, const double* p,
            double* out) {
  const CellCoords cc = locate(g, p);
  const int zn = (g.dim == 3 && g.dims[2] > 1) ? 2 : 1;
  const std::size_t sx = ncomp;
  const std::size_t sy = sx * g.dims[0];
  const std::size_t sz = sy * g.dims[1];
  for (int c = 0; c < ncomp; ++c) out[c] = 0.0;
  for (int dz = 0; dz < zn; ++dz) {
    const double wz = zn == 1 ? 1.0 : (dz ? cc.f[2] : 1.0 - cc.f[2]);
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? cc.f[1] : 1.0 - cc.f[1];
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? cc.f[0] : 1.0 - cc.f[0]) * wy * wz;
        const std::size_t off = (cc.i0[0] + dx) * sx + (cc.i0[1] + dy) * sy +
                                (cc.i0[2] + dz) * sz;
        for (int c = 0; c < ncomp; ++c) out[c] += w * data[off + c];
      }
    }
  }
}

void sample_with_jacobian(const GridSpec& g, const double* data, int ncomp,
                          const double* p, double* out, double* jac) {
  const CellCoords cc = locate(g, p);
  const int d = g.dim;
  const int zn = (d == 3 && g.dims[2] > 1) ? 2 : 1;
  const std::size_t sx = ncomp;
  const std::size_t sy = sx * g.dims[0];
  const std::size_t sz = sy * g.dims[1];
  for (int c = 0; c < ncomp; ++c) {
    out[c] = 0.0;
    for (int a = 0; a < d; ++a) jac[c * d + a] = 0.0;
  }
  for (int dz = 0; dz < zn; ++dz) {
    const double wz = zn == 1 ? 1.0 : (dz ? cc.f[2] : 1.0 - cc.f[2]);
    const double gz = zn == 1 ? 0.0 : (dz ? 1.0 : -1.0);
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? cc.f[1] : 1.0 - cc.f[1];
      const double gy = dy ? 1.0 : -1.0;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? cc.f[0] : 1.0 - cc.f[0];
        const double gx = dx ? 1.0 : -1.0;
        const std::size_t off = (cc.i0[0] + dx) * sx + (cc.i0[1] + dy) * sy +
                                (cc.i0[2] + dz) * sz;
        for (int c = 0; c < ncomp; ++c) {
          const double v = data[off + c];
          out[c] += wx * wy * wz * v;
          jac[c * d + 0] += gx * wy * wz * v;
          jac[c * d + 1] += wx * gy * wz * v;
          if (d == 3) jac[c * d + 2] += wx * wy * gz * v;
        }
      }
    }
  }
  // Scale to physical units; clamped axes contribute no motion.
  for (int c = 0; c < ncomp; ++c)
    for (int a = 0; a < d; ++a)
      jac[c * d + a] = cc.clamped[a] ? 0.0 : jac[c * d + a] / g.spacing[a];
}

void sample_adjoint(const GridSpec& g, double* grad, int ncomp,
                    const double* p, const double* adj) {
  const CellCoords cc = locate(g, p);
  const int zn = (g.dim == 3 && g.dims[2] > 1) ? 2 : 1;
  const std::size_t sx = ncomp;
  const std::size_t sy = sx * g.dims[0];
  const std::size_t sz = sy * g.dims[1];
  for (int dz = 0; dz < zn; ++dz) {
    const double wz = zn == 1 ? 1.0 : (dz ? cc.f[2] : 1.0 - cc.f[2]);
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? cc.f[1] : 1.0 - cc.f[1];
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? cc.f[0] : 1.0 - cc.f[0]) * wy * wz;
        const std::size_t off = (cc.i0[0] + dx) * sx + (cc.i0[1] + dy) * sy +
                                (cc.i0[2] + dz) * sz;
        for (int c = 0; c < ncomp; ++c) grad[off + c] += w * adj[c];
      }
    }
  }
}

void axis_derivative(const GridSpec& g, const double* data, int ncomp, int c,
                     int axis, double* out) {
  const int n = g.dims[axis];
  const double h = g.spacing[axis];
  const std::size_t strides[3] = {static_cast<std::size_t>(ncomp),
                                  static_cast<std::size_t>(ncomp) * g.dims[0],
                                  static_cast<std::size_t>(ncomp) * g.dims[0] *
                                      g.dims[1]};
  const std::size_t s = strides[axis];
  std::size_t p = 0;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x, ++p) {
        const int idx[3] = {x, y, z};
        const int i = idx[axis];
        const std::size_t base = p * ncomp + c;
        double d;
        if (i == 0)
          d = (data[base + s] - data[base]) / h;
        else if (i == n - 1)
          d = (data[base] - data[base - s]) / h;
        else
          d = (data[base + s] - data[base - s]) / (2.0 * h);
        out[p] = d;
      }
}

void axis_derivative_adjoint(const GridSpec& g, double* grad, int ncomp, int c,
                             int axis, const double* adj) {
  const int n = g.dims[axis];
  const double h = g.spacing[axis];
  const std::size_t strides[3] = {static_cast<std::size_t>(ncomp),
                                  static_cast<std::size_t>(ncomp) * g.dims[0],
                                  static_cast<std::size_t>(ncomp) * g.dims[0] *
                                      g.dims[1]};
  const std::size_t s = strides[axis];
  std::size_t p = 0;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x, ++p) {
        const int idx[3] = {x, y, z};
        const int i = idx[axis];
        const std::size_t base = p * ncomp + c;
        const double a = adj[p];
        if (i == 0) {
          grad[base + s] += a / h;
          grad[base] -= a / h;
        } else if (i == n - 1) {
          grad[base] += a / h;
          grad[base - s] -= a / h;
        } else {
          grad[base + s] += a / (2.0 * h);
          grad[base - s] -= a / (2.0 * h);
        }
      }
}

}  // namespace detail

static void check_same_dim(const GridSpec& a, const GridSpec& b) {
  if (a.dim != b.dim)
    throw Error("dim_mismatch", "grids have different dimensionality");
}

ScalarField interpolate(const ScalarField& field, const DeformationMap& points) {
  check_same_dim(field.grid, points.grid);
  ScalarField out(points.grid);
  const int d = points.grid.dim;
  const std::size_t n = points.grid.num_points();
  for (std::size_t p = 0; p < n; ++p)
    detail::sample(field.grid, field.values.data(), 1, &points.coords[p * d],
                   &out.values[p]);
  return out;
}

VectorField interpolate(const VectorField& field, const DeformationMap& points) {
  check_same_dim(field.grid, points.grid);
  VectorField out(points.grid, field.ncomp);
  const int d = points.grid.dim;
  const std::size_t n = points.grid.num_points();
  for (std::size_t p = 0; p < n; ++p)
    detail::sample(field.grid, field.data.data(), field.ncomp,
                   &points.coords[p * d], &out.data[p * field.ncomp]);
  return out;
}

DeformationMap compose_maps(const DeformationMap& outer,
                            const DeformationMap& inner) {
  check_same_dim(outer.grid, inner.grid);
  DeformationMap out(inner.grid);
  const int d = inner.grid.dim;
  const std::size_t n = inner.grid.num_points();
  for (std::size_t p = 0; p < n; ++p)
    detail::sample(outer.grid, outer.coords.data(), d, &inner.coords[p * d],
                   &out.coords[p * d]);
  return out;
}

VectorField gradient(const ScalarField& field) {
  const GridSpec& g = field.grid;
  VectorField out(g, g.dim);
  std::vector<double> comp(g.num_points());
  for (int a = 0; a < g.dim; ++a) {
    detail::axis_derivative(g, field.values.data(), 1, 0, a, comp.data());
    const std::size_t n = g.num_points();
    for (std::size_t p = 0; p < n; ++p) out.data[p * g.dim + a] = comp[p];
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const GridSpec& g = v.grid;
  if (v.ncomp != g.dim)
    throw Error("dim_mismatch", "divergence needs one component per axis");
  ScalarField out(g, 0.0);
  std::vector<double> comp(g.num_points());
  for (int a = 0; a < g.dim; ++a) {
    detail::axis_derivative(g, v.data.data(), v.ncomp, a, a, comp.data());
    const std::size_t n = g.num_points();
    for (std::size_t p = 0; p < n; ++p) out.values[p] += comp[p];
  }
  return out;
}

ScalarField jacobian_determinant(const DeformationMap& map) {
  const GridSpec& g = map.grid;
  const int d = g.dim;
  ScalarField out(g, 0.0);
  const std::size_t n = g.num_points();
  // D[r][c] = d coords_r / d axis_c
  std::vector<std::vector<double>> D(d * d, std::vector<double>(n));
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      detail::axis_derivative(g, map.coords.data(), d, r, c,
                              D[r * d + c].data());
  if (d == 2) {
    for (std::size_t p = 0; p < n; ++p)
      out.values[p] = D[0][p] * D[3][p] - D[1][p] * D[2][p];
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      const double a = D[0][p], b = D[1][p], c = D[2][p];
      const double e = D[3][p], f = D[4][p], gg = D[5][p];
      const double h = D[6][p], i = D[7][p], j = D[8][p];
      out.values[p] = a * (f * j - gg * i) - b * (e * j - gg * h) +
                      c * (e * i - f * h);
    }
  }
  return out;
}

double min_value(const ScalarField& f) {
  return *std::min_element(f.values.begin(), f.values.end());
}

double max_value(const ScalarField& f) {
  return *std::max_element(f.values.begin(), f.values.end());
}

}  // namespace geoflow
