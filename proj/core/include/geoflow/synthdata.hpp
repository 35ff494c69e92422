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
#ifndef GEOFLOW_SYNTHDATA_HPP
#define GEOFLOW_SYNTHDATA_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "geoflow/labels.hpp"

namespace geoflow {

struct Shape {
  enum class Kind { Ellipse, Annulus, Blob };

  Kind kind = Kind::Ellipse;
  std::array<double, 3> center{0.0, 0.0, 0.0};  // mm
  std::array<double, 3> radii{1.0, 1.0, 1.0};   // semi-axes, mm
  double annulus_thickness = 0.0;               // ring width, mm
  double blob_amplitude = 0.0;                  // relative radial modulation
  int blob_lobes = 3;
  double blob_phase = 0.0;
  int label = 1;
  double intensity = 1.0;
  double edge_width = 0.0;  // mm; 0 selects 2 voxels of the grid
};

struct ShapeSceneSpec {
  GridSpec grid;
  std::vector<Shape> shapes;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Renders the scene: smooth-edged analytic shapes composited in list
/// order, labels by containment with later shapes overriding, then
/// additive Gaussian noise clamped to [0, 1 + 3*sigma]. Pure function of
/// the spec.
std::pair<ScalarField, LabelMap> generate_scene(const ShapeSceneSpec& spec);

struct PerturbationScales {
  double center_mm = 0.0;
  double radii_rel = 0.0;
  double intensity = 0.0;
};

/// n scenes, index 0 the unperturbed base (the atlas). Perturbed draws
/// that push a shape out of the domain are rejected and resampled, at
/// most 100 times each.
std::vector<std::pair<ScalarField, LabelMap>> generate_population(
    const ShapeSceneSpec& base, int n, const PerturbationScales& scales,
    std::uint64_t rng_seed);

/// Built-in noise-free scene (ellipse, annulus, wavy blob; labels 1..3)
/// on a unit-spaced grid with `size` voxels per axis, scaled from a
/// 64-voxel reference layout. Requires size >= 32.
ShapeSceneSpec default_scene(int dim, int size);

}  // namespace geoflow

#endif
