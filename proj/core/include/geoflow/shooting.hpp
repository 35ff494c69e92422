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
#ifndef GEOFLOW_SHOOTING_HPP
#define GEOFLOW_SHOOTING_HPP

#include <vector>

#include "geoflow/grid.hpp"
#include "geoflow/kernel.hpp"

namespace geoflow {

/// Snapshot of the geodesic evolution at time t. v == smooth(m, kernel)
/// always holds for exposed states; at t=0 both maps are the identity.
struct GeodesicState {
  double t = 0.0;
  VectorField m;
  VectorField v;
  DeformationMap phi_inv;
  DeformationMap phi;
};

struct ShootConfig {
  int steps_per_unit_time = 20;
  KernelSpec kernel;

  void validate() const {
    if (steps_per_unit_time < 1)
      throw Error("bad_config", "steps_per_unit_time must be >= 1");
    kernel.validate();
  }
};

/// Momentum evolution right-hand side -(div(v) m + (Dv)^T m + (Dm) v).
VectorField epdiff_rhs(const VectorField& m, const VectorField& v);

/// Integrates momentum from t=0 to t_target (either sign): RK4 on m with
/// per-stage re-smoothing, semi-Lagrangian update of phi_inv with the
/// step-start velocity, RK4 particle advection of phi through the stage
/// velocities. Steps = ceil(|t_target| * steps_per_unit_time), minimum 1.
/// Extrapolation (t outside [0,1]) continues integration; displacements are
/// never scaled. A non-finite intermediate state aborts with code
/// "blow_up" naming the step.
GeodesicState shoot(const VectorField& m0, double t_target,
                    const ShootConfig& cfg);

/// States at each requested time, one integration per sign. Times on step
/// boundaries match independent shoot calls within roundoff; times between
/// boundaries are reached by shortening the final step.
std::vector<GeodesicState> shoot_sequence(const VectorField& m0,
                                          const std::vector<double>& ts,
                                          const ShootConfig& cfg);

namespace detail {

/// All intermediates of one RK4 momentum step. Kept recomputable from the
/// step-start momentum so the registration adjoint can replay stages in
/// reverse without storing them along the whole trajectory.
struct RkStep {
  VectorField v1, k1;
  VectorField a2, v2, k2;
  VectorField a3, v3, k3;
  VectorField a4, v4, k4;
  VectorField m_next;
};

RkStep momentum_rk4_step(const VectorField& m, double dt,
                         const KernelSpec& kernel);

/// psi_next(x) = psi(x - dt*v1(x)) with v1 read at the grid node x.
DeformationMap advect_inverse_step(const DeformationMap& psi,
                                   const VectorField& v1, double dt);

/// RK4 particle advection of phi's coordinates through the stage
/// velocities of one step.
DeformationMap advect_forward_step(const DeformationMap& phi,
                                   const RkStep& st, double dt);

/// ceil(|t|*steps_per_unit_time) with a tolerance guard against roundoff
/// pushing an exact boundary to the next integer; minimum 1.
int step_count(double t, int steps_per_unit_time);

}  // namespace detail

}  // namespace geoflow

#endif
