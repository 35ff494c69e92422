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
#ifndef GEOFLOW_KERNEL_HPP
#define GEOFLOW_KERNEL_HPP

#include <vector>

#include "geoflow/grid.hpp"

namespace geoflow {

/// Multi-Gaussian smoothing kernel mapping momentum to velocity. Sigmas are
/// in physical units (mm); weights are nonnegative and sum to 1.
struct KernelSpec {
  struct Component {
    double sigma = 1.0;
    double weight = 1.0;
  };
  std::vector<Component> components;

  void validate() const;

  /// Default used when a configuration gives no kernel: sigmas at
  /// {0.05, 0.1, 0.15} of the largest grid extent, equal weights.
  static KernelSpec default_for(const GridSpec& grid);
  static KernelSpec single(double sigma);
  static KernelSpec multi(const std::vector<double>& sigmas,
                          const std::vector<double>& weights);
};

/// v = K * m: each component convolved with the multi-Gaussian kernel,
/// separably per axis, truncation radius 4*sigma. The boundary rule folds
/// the kernel back into the domain (half-sample reflection), which keeps
/// the operator exactly constant-preserving and exactly self-adjoint under
/// inner_product; both properties are load-bearing for the adjoint
/// registration gradient.
VectorField smooth(const VectorField& m, const KernelSpec& k);

/// Discrete L2 pairing sum_p dot(m_p, v_p) * voxel_volume.
double inner_product(const VectorField& m, const VectorField& v);

namespace detail {
/// Normalized 1D Gaussian taps for sigma given in voxels; radius 4*sigma,
/// at least 1. Returned vector holds taps for offsets -R..R.
std::vector<double> gaussian_taps(double sigma_voxels);
}  // namespace detail

}  // namespace geoflow

#endif
