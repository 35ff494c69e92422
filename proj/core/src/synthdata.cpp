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
#include "geoflow/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "geoflow/rng.hpp"

namespace geoflow {

namespace {

double shape_edge_width(const Shape& s, const GridSpec& g) {
  return s.edge_width > 0.0 ? s.edge_width : 2.0 * g.min_spacing();
}

/// Approximate signed distance to the shape surface, negative inside.
double shape_distance(const Shape& s, const double* p, int dim) {
  double rho2 = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double u = (p[a] - s.center[a]) / s.radii[a];
    rho2 += u * u;
  }
  const double rho = std::sqrt(rho2);
  const double rmin =
      *std::min_element(s.radii.begin(), s.radii.begin() + dim);
  switch (s.kind) {
    case Shape::Kind::Ellipse:
      return (rho - 1.0) * rmin;
    case Shape::Kind::Annulus: {
      const double outer = (rho - 1.0) * rmin;
      const double inner_scale =
          std::max(0.1, 1.0 - s.annulus_thickness / rmin);
      const double inner = (rho - inner_scale) * rmin;
      return std::max(outer, -inner);
    }
    case Shape::Kind::Blob: {
      const double theta =
          std::atan2(p[1] - s.center[1], p[0] - s.center[0]);
      const double boundary =
          1.0 + s.blob_amplitude *
                    std::sin(s.blob_lobes * theta + s.blob_phase);
      return (rho - boundary) * rmin;
    }
  }
  return 0.0;
}

double coverage(double dist, double width) {
  const double a = std::clamp(0.5 - dist / width, 0.0, 1.0);
  return a * a * (3.0 - 2.0 * a);
}

double outer_reach(const Shape& s, int axis) {
  double r = s.radii[axis];
  if (s.kind == Shape::Kind::Blob) r *= 1.0 + std::abs(s.blob_amplitude);
  return r;
}

}  // namespace

void ShapeSceneSpec::validate() const {
  grid.validate();
  if (noise_sigma < 0.0)
    throw Error("bad_scene", "noise sigma must be nonnegative");
  std::set<int> used;
  for (const Shape& s : shapes) {
    if (s.label < 1) throw Error("bad_scene", "shape labels start at 1");
    if (s.intensity < 0.0 || s.intensity > 1.0)
      throw Error("bad_scene", "shape intensity must be in [0, 1]");
    for (int a = 0; a < grid.dim; ++a)
      if (!(s.radii[a] > 0.0))
        throw Error("bad_scene", "shape radii must be positive");
    if (s.kind == Shape::Kind::Annulus && !(s.annulus_thickness > 0.0))
      throw Error("bad_scene", "annulus thickness must be positive");
    const double w = shape_edge_width(s, grid);
    for (int a = 0; a < grid.dim; ++a) {
      const double lo = grid.origin[a] + w;
      const double hi = grid.origin[a] + grid.extent(a) - w;
      if (s.center[a] - outer_reach(s, a) < lo ||
          s.center[a] + outer_reach(s, a) > hi)
        throw Error("bad_scene", "shape exceeds the domain margin");
    }
    used.insert(s.label);
  }
  for (int l = 1; l <= static_cast<int>(used.size()); ++l)
    if (!used.count(l))
      throw Error("bad_scene", "shape labels must be dense from 1");
}

std::pair<ScalarField, LabelMap> generate_scene(const ShapeSceneSpec& spec) {
  spec.validate();
  const GridSpec& g = spec.grid;
  int max_label = 0;
  for (const Shape& s : spec.shapes) max_label = std::max(max_label, s.label);

  ScalarField image(g, 0.0);
  LabelMap labels(g, max_label + 1);
  double p[3] = {0.0, 0.0, 0.0};
  std::size_t idx = 0;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x, ++idx) {
        const int iv[3] = {x, y, z};
        for (int a = 0; a < g.dim; ++a)
          p[a] = g.origin[a] + iv[a] * g.spacing[a];
        double value = 0.0;
        int label = 0;
        for (const Shape& s : spec.shapes) {
          const double d = shape_distance(s, p, g.dim);
          const double c = coverage(d, shape_edge_width(s, g));
          value = value * (1.0 - c) + s.intensity * c;
          if (d < 0.0) label = s.label;
        }
        image.values[idx] = value;
        labels.labels[idx] = static_cast<std::uint16_t>(label);
      }

  if (spec.noise_sigma > 0.0) {
    Rng rng(spec.rng_seed);
    const double hi = 1.0 + 3.0 * spec.noise_sigma;
    for (double& v : image.values)
      v = std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, hi);
  }
  return {std::move(image), std::move(labels)};
}

std::vector<std::pair<ScalarField, LabelMap>> generate_population(
    const ShapeSceneSpec& base, int n, const PerturbationScales& scales,
    std::uint64_t rng_seed) {
  base.validate();
  if (n < 1) throw Error("bad_input", "population size must be >= 1");
  std::vector<std::pair<ScalarField, LabelMap>> out;
  out.reserve(n);
  out.push_back(generate_scene(base));
  for (int i = 1; i < n; ++i) {
    Rng rng = Rng::stream(rng_seed, static_cast<std::uint64_t>(i));
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      ShapeSceneSpec trial = base;
      trial.rng_seed = rng.raw();
      for (Shape& s : trial.shapes) {
        for (int a = 0; a < base.grid.dim; ++a) {
          s.center[a] += scales.center_mm * rng.normal();
          s.radii[a] *= std::max(0.2, 1.0 + scales.radii_rel * rng.normal());
        }
        s.intensity = std::clamp(
            s.intensity + scales.intensity * rng.normal(), 0.05, 1.0);
      }
      try {
        out.push_back(generate_scene(trial));
        accepted = true;
      } catch (const Error& e) {
        if (e.code() != "bad_scene") throw;
      }
    }
    if (!accepted)
      throw Error("fixture_failed",
                  "population draw " + std::to_string(i) +
                      " rejected 100 times; shrink the perturbation scales");
  }
  return out;
}

ShapeSceneSpec default_scene(int dim, int size) {
  if (dim != 2 && dim != 3)
    throw Error("bad_config", "scene dimension must be 2 or 3");
  if (size < 32)
    throw Error("bad_config", "scene size must be at least 32 voxels");
  const double k = static_cast<double>(size) / 64.0;
  ShapeSceneSpec spec;
  if (dim == 2) {
    spec.grid = GridSpec::make2d(size, size, 1.0, 1.0);
  } else {
    spec.grid = GridSpec::make3d(size, size, size, 1.0, 1.0, 1.0);
  }
  const double zc = 0.5 * spec.grid.extent(dim == 3 ? 2 : 0);

  Shape ellipse;
  ellipse.kind = Shape::Kind::Ellipse;
  ellipse.center = {26.0 * k, 30.0 * k, zc};
  ellipse.radii = {14.0 * k, 17.0 * k, 11.0 * k};
  ellipse.label = 1;
  ellipse.intensity = 0.55;

  Shape ring;
  ring.kind = Shape::Kind::Annulus;
  ring.center = {44.0 * k, 26.0 * k, zc};
  ring.radii = {10.0 * k, 10.0 * k, 8.0 * k};
  ring.annulus_thickness = 4.0 * k;
  ring.label = 2;
  ring.intensity = 0.85;

  Shape blob;
  blob.kind = Shape::Kind::Blob;
  blob.center = {36.0 * k, 46.0 * k, zc};
  blob.radii = {9.0 * k, 8.0 * k, 7.0 * k};
  blob.blob_amplitude = 0.25;
  blob.blob_lobes = 3;
  blob.label = 3;
  blob.intensity = 0.70;

  spec.shapes = {ellipse, ring, blob};
  return spec;
}

}  // namespace geoflow
