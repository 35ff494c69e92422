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
#ifndef GEOFLOW_SUBSPACE_HPP
#define GEOFLOW_SUBSPACE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "geoflow/rng.hpp"
#include "geoflow/shooting.hpp"

namespace geoflow {

/// K initial momenta anchored at one source image, one per registration
/// target, all on one grid.
struct MomentumSet {
  struct Provenance {
    std::string target_id;
    double regularity = 0.0;
    double similarity = 0.0;
  };

  std::string source_id;
  std::vector<VectorField> momenta;
  std::vector<Provenance> provenance;  // parallel to momenta when present

  void validate() const;
};

/// One draw from the geodesic subspace: simplex weights, geodesic time,
/// the combined momentum and both maps of its geodesic, plus the seed that
/// produced the draw (sufficient to regenerate it bit-exactly).
struct SubspaceSample {
  std::vector<double> lambda;
  double t = 0.0;
  VectorField m_tilde;
  DeformationMap phi_inv;
  DeformationMap phi;
  std::uint64_t seed = 0;
};

struct SamplerConfig {
  double t_min = -1.0;
  double t_max = 2.0;
  int K = 2;
  std::uint64_t rng_seed = 0;
  ShootConfig shoot;

  void validate() const;
};

/// Pointwise sum_j lambda_j * momenta[j]. Weights must be nonnegative and
/// sum to 1 within 1e-9; the sum is renormalized to exactly 1 before use.
VectorField convex_combination(const MomentumSet& set,
                               const std::vector<double>& lambda);

/// Uniform draw on the (K-1)-simplex via normalized exponential spacings.
std::vector<double> sample_lambda(int K, Rng& rng);

/// Uniform draw on [t_min, t_max].
double sample_t(const SamplerConfig& cfg, Rng& rng);

/// Draws lambda then t from Rng(seed), combines the momenta and shoots.
/// Pure function of (set, cfg, seed); a shooting blow-up is reported
/// together with the lambda and t that caused it.
SubspaceSample draw_sample(const MomentumSet& set, const SamplerConfig& cfg,
                           std::uint64_t seed);

}  // namespace geoflow

#endif
