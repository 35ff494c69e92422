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
#ifndef GEOFLOW_REGISTRATION_HPP
#define GEOFLOW_REGISTRATION_HPP

#include <string>
#include <vector>

#include "geoflow/shooting.hpp"
#include "geoflow/subspace.hpp"

namespace geoflow {

enum class Similarity { SSD, LNCC };

struct RegConfig {
  Similarity similarity = Similarity::SSD;
  int lncc_window = 5;  // odd box width in voxels, LNCC only
  double sim_weight = 10.0;
  ShootConfig shoot;

  struct Optimizer {
    int max_iters = 60;
    double step_size = 1.0;
    double shrink = 0.5;
    double grad_tol = 1e-6;
  };
  Optimizer optimizer;

  /// Coarse-to-fine downsample factors; the last level must be 1. Each
  /// level runs level_iters iterations (max_iters everywhere when empty).
  std::vector<int> multiscale{4, 2, 1};
  std::vector<int> level_iters{60, 60, 30};

  void validate() const;
};

struct EnergyBreakdown {
  double total = 0.0;
  double regularity = 0.0;
  double similarity = 0.0;
};

struct EnergyRecord {
  int iteration = 0;  // global across levels
  int level = 0;      // multiscale level index, coarse first
  double regularity = 0.0;
  double similarity = 0.0;
  double total() const { return regularity + similarity; }
};

struct RegResult {
  VectorField m0;
  std::vector<EnergyRecord> energy_trace;
  ScalarField final_warped;
  bool converged = false;
  std::string reason;
};

/// Shooting energy 1/2<m0, K m0> + sim_weight * Sim(I0 o phi_inv(1), I1).
/// SSD is the squared-difference sum scaled by voxel volume.
EnergyBreakdown energy(const VectorField& m0, const ScalarField& I0,
                       const ScalarField& I1, const RegConfig& cfg);

/// Exact gradient of the discretized energy with respect to m0: the
/// reverse (adjoint) sweep of the discrete forward integrator. Returned in
/// the voxel-volume L2 pairing, so directional derivatives satisfy
/// dE = inner_product(gradient, direction) and the regularity term alone
/// contributes exactly smooth(m0).
VectorField energy_gradient(const VectorField& m0, const ScalarField& I0,
                            const ScalarField& I1, const RegConfig& cfg);

/// Gradient descent with backtracking line search from m0 = 0, coarse to
/// fine over cfg.multiscale. Total energy is non-increasing across
/// accepted steps within each level.
RegResult register_pair(const ScalarField& I0, const ScalarField& I1,
                        const RegConfig& cfg);

/// One registration per target, all anchored at Ic. Any failure aborts
/// with the failing target index in the message.
MomentumSet build_momentum_set(const ScalarField& Ic,
                               const std::vector<ScalarField>& targets,
                               const RegConfig& cfg,
                               const std::string& source_id = "source",
                               const std::vector<std::string>& target_ids = {});

namespace detail {

/// Block-average downsampling by an integer factor per axis; partial
/// border blocks average their in-domain voxels. The coarse origin sits at
/// the center of the first block.
ScalarField downsample(const ScalarField& f, int factor);

/// Momentum transfer to a finer grid by multilinear interpolation at the
/// fine nodes. Values are kept as-is: the smoothing kernel is normalized
/// per sample, so the induced velocity is resolution-invariant without a
/// rescale.
VectorField upsample_momentum(const VectorField& coarse, const GridSpec& fine);

/// Separable box sum with half-width r, truncated at borders (self-adjoint
/// by symmetry of the truncated window).
ScalarField box_sum(const ScalarField& f, int r);

}  // namespace detail

}  // namespace geoflow

#endif
