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
#include "geoflow/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoflow {

VectorField epdiff_rhs(const VectorField& m, const VectorField& v) {
  if (!(m.grid == v.grid) || m.ncomp != v.ncomp)
    throw Error("grid_mismatch", "epdiff_rhs needs matching fields");
  const GridSpec& g = m.grid;
  const int d = g.dim;
  if (m.ncomp != d)
    throw Error("dim_mismatch", "momentum needs one component per axis");
  const std::size_t n = g.num_points();
  VectorField out(g, d);
  std::vector<double> deriv(n);
  std::vector<double> divv(n, 0.0);
  for (int a = 0; a < d; ++a) {
    detail::axis_derivative(g, v.data.data(), d, a, a, deriv.data());
    for (std::size_t p = 0; p < n; ++p) divv[p] += deriv[p];
  }
  for (std::size_t p = 0; p < n; ++p)
    for (int i = 0; i < d; ++i) out.data[p * d + i] = divv[p] * m.data[p * d + i];
  // (Dv)^T m: out_i += sum_j d(v_j)/d(x_i) * m_j
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      detail::axis_derivative(g, v.data.data(), d, j, i, deriv.data());
      for (std::size_t p = 0; p < n; ++p)
        out.data[p * d + i] += deriv[p] * m.data[p * d + j];
    }
  // (Dm) v: out_i += sum_j d(m_i)/d(x_j) * v_j
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      detail::axis_derivative(g, m.data.data(), d, i, j, deriv.data());
      for (std::size_t p = 0; p < n; ++p)
        out.data[p * d + i] += deriv[p] * v.data[p * d + j];
    }
  for (double& x : out.data) x = -x;
  return out;
}

namespace detail {

static VectorField axpy(const VectorField& base, double alpha,
                        const VectorField& delta) {
  VectorField out = base;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += alpha * delta.data[i];
  return out;
}

RkStep momentum_rk4_step(const VectorField& m, double dt,
                         const KernelSpec& kernel) {
  RkStep s;
  s.v1 = smooth(m, kernel);
  s.k1 = epdiff_rhs(m, s.v1);
  s.a2 = axpy(m, 0.5 * dt, s.k1);
  s.v2 = smooth(s.a2, kernel);
  s.k2 = epdiff_rhs(s.a2, s.v2);
  s.a3 = axpy(m, 0.5 * dt, s.k2);
  s.v3 = smooth(s.a3, kernel);
  s.k3 = epdiff_rhs(s.a3, s.v3);
  s.a4 = axpy(m, dt, s.k3);
  s.v4 = smooth(s.a4, kernel);
  s.k4 = epdiff_rhs(s.a4, s.v4);
  s.m_next = m;
  const double w = dt / 6.0;
  for (std::size_t i = 0; i < s.m_next.data.size(); ++i)
    s.m_next.data[i] += w * (s.k1.data[i] + 2.0 * s.k2.data[i] +
                             2.0 * s.k3.data[i] + s.k4.data[i]);
  return s;
}

DeformationMap advect_inverse_step(const DeformationMap& psi,
                                   const VectorField& v1, double dt) {
  const GridSpec& g = psi.grid;
  const int d = g.dim;
  DeformationMap out(g);
  double q[3] = {0.0, 0.0, 0.0};
  std::size_t p = 0;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x, ++p) {
        const int idx[3] = {x, y, z};
        for (int c = 0; c < d; ++c)
          q[c] = g.origin[c] + idx[c] * g.spacing[c] -
                 dt * v1.data[p * d + c];
        sample(g, psi.coords.data(), d, q, &out.coords[p * d]);
      }
  return out;
}

DeformationMap advect_forward_step(const DeformationMap& phi, const RkStep& st,
                                   double dt) {
  const GridSpec& g = phi.grid;
  const int d = g.dim;
  const std::size_t n = g.num_points();
  DeformationMap out(g);
  double pos[3], q1[3], q2[3], q3[3], q4[3], tmp[3];
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < d; ++c) pos[c] = phi.coords[p * d + c];
    sample(g, st.v1.data.data(), d, pos, q1);
    for (int c = 0; c < d; ++c) tmp[c] = pos[c] + 0.5 * dt * q1[c];
    sample(g, st.v2.data.data(), d, tmp, q2);
    for (int c = 0; c < d; ++c) tmp[c] = pos[c] + 0.5 * dt * q2[c];
    sample(g, st.v3.data.data(), d, tmp, q3);
    for (int c = 0; c < d; ++c) tmp[c] = pos[c] + dt * q3[c];
    sample(g, st.v4.data.data(), d, tmp, q4);
    for (int c = 0; c < d; ++c)
      out.coords[p * d + c] =
          pos[c] + dt / 6.0 * (q1[c] + 2.0 * q2[c] + 2.0 * q3[c] + q4[c]);
  }
  return out;
}

int step_count(double t, int steps_per_unit_time) {
  const double raw = std::abs(t) * steps_per_unit_time;
  const int steps = static_cast<int>(std::ceil(raw - 1e-9));
  return std::max(1, steps);
}

static bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

namespace {

struct FlowState {
  VectorField m;
  DeformationMap phi_inv;
  DeformationMap phi;
};

void flow_step(FlowState& s, double dt, const KernelSpec& kernel,
               int step_index, int total_steps) {
  detail::RkStep st = detail::momentum_rk4_step(s.m, dt, kernel);
  s.phi_inv = detail::advect_inverse_step(s.phi_inv, st.v1, dt);
  s.phi = detail::advect_forward_step(s.phi, st, dt);
  s.m = std::move(st.m_next);
  if (!detail::all_finite(s.m.data) || !detail::all_finite(s.phi.coords) ||
      !detail::all_finite(s.phi_inv.coords))
    throw Error("blow_up", "non-finite state at step " +
                               std::to_string(step_index) + " of " +
                               std::to_string(total_steps));
}

GeodesicState expose(const FlowState& s, double t, const KernelSpec& kernel) {
  GeodesicState out;
  out.t = t;
  out.m = s.m;
  out.v = smooth(s.m, kernel);
  out.phi_inv = s.phi_inv;
  out.phi = s.phi;
  return out;
}

void check_initial(const VectorField& m0, double t) {
  m0.grid.validate();
  if (m0.ncomp != m0.grid.dim)
    throw Error("dim_mismatch", "momentum needs one component per axis");
  if (!detail::all_finite(m0.data))
    throw Error("bad_input", "initial momentum has non-finite values");
  if (!std::isfinite(t)) throw Error("bad_input", "target time must be finite");
}

}  // namespace

GeodesicState shoot(const VectorField& m0, double t_target,
                    const ShootConfig& cfg) {
  cfg.validate();
  check_initial(m0, t_target);
  const int steps = detail::step_count(t_target, cfg.steps_per_unit_time);
  const double dt = t_target / steps;
  FlowState s{m0, identity_map(m0.grid), identity_map(m0.grid)};
  for (int n = 0; n < steps; ++n) flow_step(s, dt, cfg.kernel, n + 1, steps);
  return expose(s, t_target, cfg.kernel);
}

std::vector<GeodesicState> shoot_sequence(const VectorField& m0,
                                          const std::vector<double>& ts,
                                          const ShootConfig& cfg) {
  cfg.validate();
  if (ts.empty()) throw Error("bad_input", "shoot_sequence needs times");
  check_initial(m0, ts.front());
  if (!std::is_sorted(ts.begin(), ts.end()))
    throw Error("bad_input", "shoot_sequence times must be sorted");
  for (double t : ts)
    if (!std::isfinite(t))
      throw Error("bad_input", "target time must be finite");

  std::vector<GeodesicState> out(ts.size());
  const double unit = 1.0 / cfg.steps_per_unit_time;
  for (int sign : {+1, -1}) {
    // indices for this sweep, ordered by increasing |t|
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < ts.size(); ++i)
      if ((sign > 0 && ts[i] >= 0.0) || (sign < 0 && ts[i] < 0.0))
        order.push_back(i);
    if (sign < 0) std::reverse(order.begin(), order.end());
    if (order.empty()) continue;

    FlowState s{m0, identity_map(m0.grid), identity_map(m0.grid)};
    const double abs_last = std::abs(ts[order.back()]);
    const int total = detail::step_count(abs_last, cfg.steps_per_unit_time);
    int done = 0;
    for (std::size_t i : order) {
      const double t = ts[i];
      const int k = static_cast<int>(
          std::floor(std::abs(t) * cfg.steps_per_unit_time + 1e-9));
      while (done < k) {
        flow_step(s, sign * unit, cfg.kernel, done + 1, total);
        ++done;
      }
      const double boundary_t = sign * (done * unit);
      const double rem = t - boundary_t;
      if (std::abs(rem) > 1e-12) {
        FlowState partial = s;
        flow_step(partial, rem, cfg.kernel, done + 1, total);
        out[i] = expose(partial, t, cfg.kernel);
      } else {
        out[i] = expose(s, t, cfg.kernel);
      }
    }
  }
  return out;
}

}  // namespace geoflow
