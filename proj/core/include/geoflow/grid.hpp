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
#ifndef GEOFLOW_GRID_HPP
#define GEOFLOW_GRID_HPP

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoflow {

/// Error with a stable machine-readable code, used across the toolkit.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

/// Regular-grid geometry: per-axis point counts, physical spacing (mm) and
/// the physical coordinate of index (0,...,0). 2D grids keep a degenerate
/// third axis (dims[2]==1) so loops are uniform; logical dimensionality is
/// `dim`.
struct GridSpec {
  int dim = 2;
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  static GridSpec make2d(int nx, int ny, double hx = 1.0, double hy = 1.0,
                         double ox = 0.0, double oy = 0.0);
  static GridSpec make3d(int nx, int ny, int nz, double hx = 1.0,
                         double hy = 1.0, double hz = 1.0, double ox = 0.0,
                         double oy = 0.0, double oz = 0.0);

  void validate() const;

  std::size_t num_points() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  double voxel_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing[a];
    return v;
  }
  double min_spacing() const {
    double s = spacing[0];
    for (int a = 1; a < dim; ++a) s = s < spacing[a] ? s : spacing[a];
    return s;
  }
  /// Physical extent along axis a, (n-1)*h.
  double extent(int a) const { return (dims[a] - 1) * spacing[a]; }
  double max_extent() const {
    double e = extent(0);
    for (int a = 1; a < dim; ++a) e = e > extent(a) ? e : extent(a);
    return e;
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  bool operator==(const GridSpec& o) const = default;
};

/// d-dimensional image of real intensities, row-major with x fastest.
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), values(g.num_points(), fill) {}

  double& at(int x, int y, int z = 0) { return values[grid.index(x, y, z)]; }
  double at(int x, int y, int z = 0) const {
    return values[grid.index(x, y, z)];
  }
};

/// Per-grid-point vectors, components interleaved per point. Houses
/// velocities (mm per unit time), displacements (mm) and momenta (dual,
/// per-volume scaling). ncomp is normally grid.dim but is free so the same
/// container can hold multi-channel data.
struct VectorField {
  GridSpec grid;
  int ncomp = 0;
  std::vector<double> data;

  VectorField() = default;
  VectorField(const GridSpec& g, int ncomponents)
      : grid(g), ncomp(ncomponents),
        data(g.num_points() * static_cast<std::size_t>(ncomponents), 0.0) {}
  explicit VectorField(const GridSpec& g) : VectorField(g, g.dim) {}

  double& at(std::size_t point, int c) { return data[point * ncomp + c]; }
  double at(std::size_t point, int c) const { return data[point * ncomp + c]; }
};

/// Per-grid-point physical coordinates representing a transformation.
/// The identity map satisfies coords(i) = origin + i*spacing exactly.
struct DeformationMap {
  GridSpec grid;
  std::vector<double> coords;  // dim components per point, interleaved

  DeformationMap() = default;
  explicit DeformationMap(const GridSpec& g)
      : grid(g), coords(g.num_points() * static_cast<std::size_t>(g.dim), 0.0) {}

  double& at(std::size_t point, int c) { return coords[point * grid.dim + c]; }
  double at(std::size_t point, int c) const {
    return coords[point * grid.dim + c];
  }
};

DeformationMap identity_map(const GridSpec& grid);

/// Multilinear interpolation of `field` at the physical points held by
/// `points`. Out-of-domain queries clamp the query coordinate to the
/// domain box (border replication).
ScalarField interpolate(const ScalarField& field, const DeformationMap& points);
VectorField interpolate(const VectorField& field, const DeformationMap& points);

/// result(x) = outer evaluated at inner(x), multilinear with border clamp.
DeformationMap compose_maps(const DeformationMap& outer,
                            const DeformationMap& inner);

/// Central differences in the interior, one-sided at borders, 1/spacing
/// scaled. Exact on affine fields at interior points.
VectorField gradient(const ScalarField& field);
ScalarField divergence(const VectorField& v);

/// Determinant of the finite-difference Jacobian of the map at every grid
/// point. Identity gives exactly 1; values <= 0 flag folds.
ScalarField jacobian_determinant(const DeformationMap& map);

double min_value(const ScalarField& f);
double max_value(const ScalarField& f);

namespace detail {

/// Multilinear sample of an interleaved field (ncomp channels) at physical
/// point p, clamp-to-border. `out` receives ncomp values.
void sample(const GridSpec& g, const double* data, int ncomp, const double* p,
            double* out);

/// Same, also writing d(out[c])/d(p[a]) into jac[c*dim + a] (the exact
/// derivative of the interpolant; zero along clamped axes).
void sample_with_jacobian(const GridSpec& g, const double* data, int ncomp,
                          const double* p, double* out, double* jac);

/// Scatter transpose of `sample`: accumulates adj[c] into grad at the
/// interpolation corner weights. Exact adjoint of the gather.
void sample_adjoint(const GridSpec& g, double* grad, int ncomp,
                    const double* p, const double* adj);

/// 1D derivative along `axis` of channel c of an interleaved field:
/// central interior, one-sided borders, 1/spacing scaled.
void axis_derivative(const GridSpec& g, const double* data, int ncomp, int c,
                     int axis, double* out);

/// Exact transpose of axis_derivative: accumulates into grad (channel c,
/// interleaved ncomp layout) the adjoint of the stencil applied to adj.
void axis_derivative_adjoint(const GridSpec& g, double* grad, int ncomp, int c,
                             int axis, const double* adj);

}  // namespace detail

}  // namespace geoflow

#endif
