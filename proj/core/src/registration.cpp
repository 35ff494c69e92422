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
#include "geoflow/registration.hpp"

#include <cmath>
#include <utility>

namespace geoflow {

void RegConfig::validate() const {
  if (!(sim_weight > 0.0))
    throw Error("bad_config", "sim_weight must be positive");
  if (similarity == Similarity::LNCC &&
      (lncc_window < 3 || lncc_window % 2 == 0))
    throw Error("bad_config", "lncc_window must be odd and >= 3");
  shoot.validate();
  if (optimizer.max_iters < 1)
    throw Error("bad_config", "max_iters must be >= 1");
  if (!(optimizer.step_size > 0.0))
    throw Error("bad_config", "step_size must be positive");
  if (!(optimizer.shrink > 0.0 && optimizer.shrink < 1.0))
    throw Error("bad_config", "shrink factor must be in (0, 1)");
  if (!(optimizer.grad_tol >= 0.0))
    throw Error("bad_config", "grad_tol must be nonnegative");
  if (multiscale.empty())
    throw Error("bad_config", "multiscale needs at least one level");
  for (std::size_t i = 0; i < multiscale.size(); ++i) {
    if (multiscale[i] < 1)
      throw Error("bad_config", "multiscale factors must be positive");
    if (i > 0 && multiscale[i] >= multiscale[i - 1])
      throw Error("bad_config", "multiscale factors must be descending");
  }
  if (multiscale.back() != 1)
    throw Error("bad_config", "multiscale must end at factor 1");
  if (!level_iters.empty()) {
    if (level_iters.size() != multiscale.size())
      throw Error("bad_config", "level_iters must match multiscale length");
    for (int it : level_iters)
      if (it < 0) throw Error("bad_config", "level_iters must be nonnegative");
  }
}

namespace detail {

ScalarField downsample(const ScalarField& f, int factor) {
  if (factor < 1) throw Error("bad_config", "downsample factor must be >= 1");
  if (factor == 1) return f;
  const GridSpec& g = f.grid;
  GridSpec cg = g;
  for (int a = 0; a < g.dim; ++a) {
    cg.dims[a] = (g.dims[a] + factor - 1) / factor;
    cg.spacing[a] = g.spacing[a] * factor;
    cg.origin[a] = g.origin[a] + 0.5 * (factor - 1) * g.spacing[a];
    if (cg.dims[a] < 2)
      throw Error("bad_config", "multiscale factor too large for grid");
  }
  ScalarField out(cg);
  for (int cz = 0; cz < cg.dims[2]; ++cz)
    for (int cy = 0; cy < cg.dims[1]; ++cy)
      for (int cx = 0; cx < cg.dims[0]; ++cx) {
        const int lo[3] = {cx * factor, cy * factor,
                           g.dim == 3 ? cz * factor : cz};
        int hi[3];
        for (int a = 0; a < 3; ++a) {
          const int block = (a < g.dim) ? factor : 1;
          hi[a] = std::min(lo[a] + block, g.dims[a]);
        }
        double acc = 0.0;
        int count = 0;
        for (int z = lo[2]; z < hi[2]; ++z)
          for (int y = lo[1]; y < hi[1]; ++y)
            for (int x = lo[0]; x < hi[0]; ++x, ++count)
              acc += f.values[g.index(x, y, z)];
        out.values[cg.index(cx, cy, cz)] = acc / count;
      }
  return out;
}

VectorField upsample_momentum(const VectorField& coarse, const GridSpec& fine) {
  if (coarse.grid.dim != fine.dim)
    throw Error("dim_mismatch", "upsample needs matching dimensionality");
  VectorField out(fine, fine.dim);
  const int d = fine.dim;
  double pos[3] = {0.0, 0.0, 0.0};
  std::size_t p = 0;
  for (int z = 0; z < fine.dims[2]; ++z)
    for (int y = 0; y < fine.dims[1]; ++y)
      for (int x = 0; x < fine.dims[0]; ++x, ++p) {
        const int idx[3] = {x, y, z};
        for (int c = 0; c < d; ++c)
          pos[c] = fine.origin[c] + idx[c] * fine.spacing[c];
        sample(coarse.grid, coarse.data.data(), d, pos, &out.data[p * d]);
      }
  return out;
}

ScalarField box_sum(const ScalarField& f, int r) {
  if (r < 0) throw Error("bad_config", "box radius must be nonnegative");
  const GridSpec& g = f.grid;
  ScalarField out = f;
  std::vector<double> line, acc;
  for (int axis = 0; axis < g.dim; ++axis) {
    const int n = g.dims[axis];
    line.resize(n);
    acc.resize(n);
    const std::size_t stride_pts[3] = {
        1, static_cast<std::size_t>(g.dims[0]),
        static_cast<std::size_t>(g.dims[0]) * g.dims[1]};
    const std::size_t s = stride_pts[axis];
    const int oa = axis == 0 ? 1 : 0;
    const int ob = axis == 2 ? 1 : 2;
    for (int b = 0; b < g.dims[ob]; ++b)
      for (int a = 0; a < g.dims[oa]; ++a) {
        const std::size_t base = stride_pts[oa] * a + stride_pts[ob] * b;
        for (int i = 0; i < n; ++i) line[i] = out.values[base + s * i];
        for (int i = 0; i < n; ++i) {
          const int lo = std::max(0, i - r);
          const int hi = std::min(n - 1, i + r);
          double sum = 0.0;
          for (int k = lo; k <= hi; ++k) sum += line[k];
          acc[i] = sum;
        }
        for (int i = 0; i < n; ++i) out.values[base + s * i] = acc[i];
      }
  }
  return out;
}

}  // namespace detail

namespace {

void add_scaled(VectorField& dst, const VectorField& src, double alpha) {
  for (std::size_t i = 0; i < dst.data.size(); ++i)
    dst.data[i] += alpha * src.data[i];
}

VectorField scaled_copy(const VectorField& src, double alpha) {
  VectorField out = src;
  for (double& x : out.data) x *= alpha;
  return out;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Checkpointed forward integration to t=1: momentum and inverse map at
/// every step boundary, enough to replay any step's stages in reverse.
struct Trajectory {
  int steps = 0;
  double dt = 0.0;
  std::vector<VectorField> m;       // steps+1 entries
  std::vector<DeformationMap> psi;  // steps+1 entries
};

Trajectory forward_flow(const VectorField& m0, const ShootConfig& cfg) {
  Trajectory tr;
  tr.steps = detail::step_count(1.0, cfg.steps_per_unit_time);
  tr.dt = 1.0 / tr.steps;
  tr.m.reserve(tr.steps + 1);
  tr.psi.reserve(tr.steps + 1);
  tr.m.push_back(m0);
  tr.psi.push_back(identity_map(m0.grid));
  for (int n = 0; n < tr.steps; ++n) {
    detail::RkStep st = detail::momentum_rk4_step(tr.m[n], tr.dt, cfg.kernel);
    tr.psi.push_back(detail::advect_inverse_step(tr.psi[n], st.v1, tr.dt));
    tr.m.push_back(std::move(st.m_next));
    if (!all_finite(tr.m.back().data) || !all_finite(tr.psi.back().coords))
      throw Error("blow_up", "non-finite state at step " +
                                 std::to_string(n + 1) + " of " +
                                 std::to_string(tr.steps));
  }
  return tr;
}

struct LnccStats {
  ScalarField count;  // box population per point
  ScalarField mu_w, mu_j;
  ScalarField cov, var_w, var_j;
  ScalarField denom;  // sqrt(var_w*var_j + eps)
};

constexpr double kLnccEps = 1e-10;

LnccStats lncc_stats(const ScalarField& W, const ScalarField& J, int window) {
  const int r = window / 2;
  const GridSpec& g = W.grid;
  const std::size_t n = g.num_points();
  LnccStats s{ScalarField(g, 1.0), ScalarField(g), ScalarField(g),
              ScalarField(g),      ScalarField(g), ScalarField(g),
              ScalarField(g)};
  s.count = detail::box_sum(s.count, r);
  s.mu_w = detail::box_sum(W, r);
  s.mu_j = detail::box_sum(J, r);
  ScalarField ww(g), jj(g), wj(g);
  for (std::size_t p = 0; p < n; ++p) {
    ww.values[p] = W.values[p] * W.values[p];
    jj.values[p] = J.values[p] * J.values[p];
    wj.values[p] = W.values[p] * J.values[p];
  }
  ww = detail::box_sum(ww, r);
  jj = detail::box_sum(jj, r);
  wj = detail::box_sum(wj, r);
  for (std::size_t p = 0; p < n; ++p) {
    const double c = s.count.values[p];
    s.mu_w.values[p] /= c;
    s.mu_j.values[p] /= c;
    s.cov.values[p] = wj.values[p] / c - s.mu_w.values[p] * s.mu_j.values[p];
    s.var_w.values[p] =
        std::max(0.0, ww.values[p] / c - s.mu_w.values[p] * s.mu_w.values[p]);
    s.var_j.values[p] =
        std::max(0.0, jj.values[p] / c - s.mu_j.values[p] * s.mu_j.values[p]);
    s.denom.values[p] =
        std::sqrt(s.var_w.values[p] * s.var_j.values[p] + kLnccEps);
  }
  return s;
}

/// Similarity term value, including sim_weight and voxel volume.
double sim_value(const ScalarField& W, const ScalarField& J,
                 const RegConfig& cfg) {
  const std::size_t n = W.grid.num_points();
  const double vol = W.grid.voxel_volume();
  if (cfg.similarity == Similarity::SSD) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double r = W.values[p] - J.values[p];
      acc += r * r;
    }
    return cfg.sim_weight * vol * acc;
  }
  const LnccStats s = lncc_stats(W, J, cfg.lncc_window);
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p)
    acc += 1.0 - s.cov.values[p] / s.denom.values[p];
  return cfg.sim_weight * vol * acc;
}

/// d(similarity)/dW in the voxel-volume pairing (the voxel volume divides
/// out of the Euclidean partial derivative).
ScalarField sim_derivative(const ScalarField& W, const ScalarField& J,
                           const RegConfig& cfg) {
  const GridSpec& g = W.grid;
  const std::size_t n = g.num_points();
  ScalarField out(g);
  if (cfg.similarity == Similarity::SSD) {
    for (std::size_t p = 0; p < n; ++p)
      out.values[p] = 2.0 * cfg.sim_weight * (W.values[p] - J.values[p]);
    return out;
  }
  const int r = cfg.lncc_window / 2;
  const LnccStats s = lncc_stats(W, J, cfg.lncc_window);
  ScalarField A(g), C(g), Amu(g), Cmu(g);
  for (std::size_t p = 0; p < n; ++p) {
    const double d = s.denom.values[p];
    A.values[p] = 1.0 / (s.count.values[p] * d);
    C.values[p] = s.cov.values[p] * s.var_j.values[p] /
                  (s.count.values[p] * d * d * d);
    Amu.values[p] = A.values[p] * s.mu_j.values[p];
    Cmu.values[p] = C.values[p] * s.mu_w.values[p];
  }
  const ScalarField bA = detail::box_sum(A, r);
  const ScalarField bC = detail::box_sum(C, r);
  const ScalarField bAmu = detail::box_sum(Amu, r);
  const ScalarField bCmu = detail::box_sum(Cmu, r);
  for (std::size_t p = 0; p < n; ++p)
    out.values[p] = -cfg.sim_weight *
                    (J.values[p] * bA.values[p] - bAmu.values[p] -
                     W.values[p] * bC.values[p] + bCmu.values[p]);
  return out;
}

EnergyBreakdown energy_from_trajectory(const Trajectory& tr,
                                       const VectorField& m0,
                                       const ScalarField& I0,
                                       const ScalarField& I1,
                                       const RegConfig& cfg) {
  EnergyBreakdown e;
  e.regularity = 0.5 * inner_product(m0, smooth(m0, cfg.shoot.kernel));
  const ScalarField warped = interpolate(I0, tr.psi.back());
  e.similarity = sim_value(warped, I1, cfg);
  e.total = e.regularity + e.similarity;
  return e;
}

/// Adjoint of epdiff_rhs: accumulates into m_hat and v_hat the pullback of
/// the output adjoint o through F(m, v) = -(div(v) m + (Dv)^T m + (Dm) v).
void epdiff_rhs_adjoint(const VectorField& m, const VectorField& v,
                        const VectorField& o, VectorField& m_hat,
                        VectorField& v_hat) {
  const GridSpec& g = m.grid;
  const int d = g.dim;
  const std::size_t n = g.num_points();
  std::vector<double> s(n, 0.0), deriv(n), tmp(n);
  for (int a = 0; a < d; ++a) {
    detail::axis_derivative(g, v.data.data(), d, a, a, deriv.data());
    for (std::size_t p = 0; p < n; ++p) s[p] += deriv[p];
  }
  // div(v) m term
  for (std::size_t p = 0; p < n; ++p) {
    double sh = 0.0;
    for (int i = 0; i < d; ++i) {
      m_hat.data[p * d + i] -= o.data[p * d + i] * s[p];
      sh -= o.data[p * d + i] * m.data[p * d + i];
    }
    tmp[p] = sh;
  }
  for (int a = 0; a < d; ++a)
    detail::axis_derivative_adjoint(g, v_hat.data.data(), d, a, a, tmp.data());
  // (Dv)^T m term: output i carries d(v_j)/d(x_i) * m_j
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      detail::axis_derivative(g, v.data.data(), d, j, i, deriv.data());
      for (std::size_t p = 0; p < n; ++p) {
        m_hat.data[p * d + j] -= o.data[p * d + i] * deriv[p];
        tmp[p] = -o.data[p * d + i] * m.data[p * d + j];
      }
      detail::axis_derivative_adjoint(g, v_hat.data.data(), d, j, i,
                                      tmp.data());
    }
  // (Dm) v term: output i carries d(m_i)/d(x_j) * v_j
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      detail::axis_derivative(g, m.data.data(), d, i, j, deriv.data());
      for (std::size_t p = 0; p < n; ++p) {
        v_hat.data[p * d + j] -= o.data[p * d + i] * deriv[p];
        tmp[p] = -o.data[p * d + i] * v.data[p * d + j];
      }
      detail::axis_derivative_adjoint(g, m_hat.data.data(), d, i, j,
                                      tmp.data());
    }
}

VectorField backward_gradient(const Trajectory& tr, const VectorField& m0,
                              const ScalarField& I0, const ScalarField& I1,
                              const RegConfig& cfg) {
  const KernelSpec& kern = cfg.shoot.kernel;
  const GridSpec& g = m0.grid;
  const int d = g.dim;
  const std::size_t n = g.num_points();

  const ScalarField warped = interpolate(I0, tr.psi.back());
  const ScalarField what = sim_derivative(warped, I1, cfg);

  // Seed the map adjoint through W(p) = I0(psi_N(p)).
  DeformationMap psi_hat(g);
  {
    double value;
    double jac[3];
    for (std::size_t p = 0; p < n; ++p) {
      detail::sample_with_jacobian(I0.grid, I0.values.data(), 1,
                                   &tr.psi.back().coords[p * d], &value, jac);
      for (int a = 0; a < d; ++a)
        psi_hat.coords[p * d + a] = jac[a] * what.values[p];
    }
  }
  VectorField m_hat(g, d);

  for (int step = tr.steps - 1; step >= 0; --step) {
    const VectorField& m_n = tr.m[step];
    const DeformationMap& psi_n = tr.psi[step];
    const detail::RkStep st = detail::momentum_rk4_step(m_n, tr.dt, kern);

    // Semi-Lagrangian adjoint: psi_next(x) = psi_n(x - dt*v1(x)).
    DeformationMap psi_hat_prev(g);
    VectorField v1_hat_map(g, d);
    {
      double q[3], value[3], jac[9];
      std::size_t p = 0;
      for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
          for (int x = 0; x < g.dims[0]; ++x, ++p) {
            const int idx[3] = {x, y, z};
            for (int c = 0; c < d; ++c)
              q[c] = g.origin[c] + idx[c] * g.spacing[c] -
                     tr.dt * st.v1.data[p * d + c];
            detail::sample_with_jacobian(g, psi_n.coords.data(), d, q, value,
                                         jac);
            detail::sample_adjoint(g, psi_hat_prev.coords.data(), d, q,
                                   &psi_hat.coords[p * d]);
            for (int a = 0; a < d; ++a) {
              double qh = 0.0;
              for (int c = 0; c < d; ++c)
                qh += jac[c * d + a] * psi_hat.coords[p * d + c];
              v1_hat_map.data[p * d + a] = -tr.dt * qh;
            }
          }
    }

    // RK4 adjoint, stages replayed in reverse.
    VectorField k1h = scaled_copy(m_hat, tr.dt / 6.0);
    VectorField k2h = scaled_copy(m_hat, tr.dt / 3.0);
    VectorField k3h = scaled_copy(m_hat, tr.dt / 3.0);
    VectorField k4h = scaled_copy(m_hat, tr.dt / 6.0);

    VectorField a4h(g, d), v4h(g, d);
    epdiff_rhs_adjoint(st.a4, st.v4, k4h, a4h, v4h);
    add_scaled(a4h, smooth(v4h, kern), 1.0);
    add_scaled(m_hat, a4h, 1.0);
    add_scaled(k3h, a4h, tr.dt);

    VectorField a3h(g, d), v3h(g, d);
    epdiff_rhs_adjoint(st.a3, st.v3, k3h, a3h, v3h);
    add_scaled(a3h, smooth(v3h, kern), 1.0);
    add_scaled(m_hat, a3h, 1.0);
    add_scaled(k2h, a3h, 0.5 * tr.dt);

    VectorField a2h(g, d), v2h(g, d);
    epdiff_rhs_adjoint(st.a2, st.v2, k2h, a2h, v2h);
    add_scaled(a2h, smooth(v2h, kern), 1.0);
    add_scaled(m_hat, a2h, 1.0);
    add_scaled(k1h, a2h, 0.5 * tr.dt);

    // Stage 1 momentum equals m_n; v1 also drove the map update.
    VectorField m1h(g, d), v1h(g, d);
    epdiff_rhs_adjoint(m_n, st.v1, k1h, m1h, v1h);
    add_scaled(v1h, v1_hat_map, 1.0);
    add_scaled(m_hat, m1h, 1.0);
    add_scaled(m_hat, smooth(v1h, kern), 1.0);

    psi_hat = std::move(psi_hat_prev);
  }

  VectorField grad = smooth(m0, kern);
  add_scaled(grad, m_hat, 1.0);
  return grad;
}

void check_pair(const ScalarField& I0, const ScalarField& I1) {
  if (!(I0.grid == I1.grid))
    throw Error("grid_mismatch", "images must share one grid");
  if (!all_finite(I0.values) || !all_finite(I1.values))
    throw Error("bad_input", "images must have finite intensities");
}

void check_momentum(const VectorField& m0, const ScalarField& I0) {
  if (!(m0.grid == I0.grid) || m0.ncomp != m0.grid.dim)
    throw Error("grid_mismatch", "momentum must live on the image grid");
}

}  // namespace

EnergyBreakdown energy(const VectorField& m0, const ScalarField& I0,
                       const ScalarField& I1, const RegConfig& cfg) {
  cfg.validate();
  check_pair(I0, I1);
  check_momentum(m0, I0);
  const Trajectory tr = forward_flow(m0, cfg.shoot);
  return energy_from_trajectory(tr, m0, I0, I1, cfg);
}

VectorField energy_gradient(const VectorField& m0, const ScalarField& I0,
                            const ScalarField& I1, const RegConfig& cfg) {
  cfg.validate();
  check_pair(I0, I1);
  check_momentum(m0, I0);
  const Trajectory tr = forward_flow(m0, cfg.shoot);
  return backward_gradient(tr, m0, I0, I1, cfg);
}

RegResult register_pair(const ScalarField& I0, const ScalarField& I1,
                        const RegConfig& cfg) {
  cfg.validate();
  check_pair(I0, I1);

  RegResult res;
  res.reason = "max iterations";
  int global_iter = 0;
  VectorField m;
  bool have_m = false;

  for (std::size_t li = 0; li < cfg.multiscale.size(); ++li) {
    const int factor = cfg.multiscale[li];
    const ScalarField J0 = detail::downsample(I0, factor);
    const ScalarField J1 = detail::downsample(I1, factor);
    if (!have_m) {
      m = VectorField(J0.grid, J0.grid.dim);
      have_m = true;
    } else {
      m = detail::upsample_momentum(m, J0.grid);
    }
    const int iters =
        cfg.level_iters.empty() ? cfg.optimizer.max_iters : cfg.level_iters[li];
    const bool finest = li + 1 == cfg.multiscale.size();

    Trajectory tr = forward_flow(m, cfg.shoot);
    EnergyBreakdown cur = energy_from_trajectory(tr, m, J0, J1, cfg);
    res.energy_trace.push_back({global_iter, static_cast<int>(li),
                                cur.regularity, cur.similarity});
    double step = cfg.optimizer.step_size;

    for (int it = 0; it < iters; ++it) {
      const VectorField grad = backward_gradient(tr, m, J0, J1, cfg);
      const double gnorm2 = inner_product(grad, grad);
      if (std::sqrt(gnorm2) < cfg.optimizer.grad_tol) {
        if (finest) {
          res.converged = true;
          res.reason = "gradient norm below tolerance";
        }
        break;
      }
      bool accepted = false;
      for (int bt = 0; bt < 40 && !accepted; ++bt) {
        VectorField trial = m;
        add_scaled(trial, grad, -step);
        bool ok = true;
        Trajectory trial_tr;
        EnergyBreakdown trial_e;
        try {
          trial_tr = forward_flow(trial, cfg.shoot);
          trial_e = energy_from_trajectory(trial_tr, trial, J0, J1, cfg);
        } catch (const Error& e) {
          if (e.code() != "blow_up") throw;
          ok = false;
        }
        if (ok && std::isfinite(trial_e.total) &&
            trial_e.total <= cur.total - 1e-4 * step * gnorm2) {
          m = std::move(trial);
          tr = std::move(trial_tr);
          cur = trial_e;
          accepted = true;
        } else {
          step *= cfg.optimizer.shrink;
        }
      }
      ++global_iter;
      if (!accepted) {
        if (finest) res.reason = "line search exhausted";
        break;
      }
      res.energy_trace.push_back({global_iter, static_cast<int>(li),
                                  cur.regularity, cur.similarity});
      step *= 2.0;
    }
  }

  res.m0 = std::move(m);
  res.final_warped = interpolate(I0, shoot(res.m0, 1.0, cfg.shoot).phi_inv);
  return res;
}

MomentumSet build_momentum_set(const ScalarField& Ic,
                               const std::vector<ScalarField>& targets,
                               const RegConfig& cfg,
                               const std::string& source_id,
                               const std::vector<std::string>& target_ids) {
  if (targets.empty())
    throw Error("bad_input", "momentum set needs at least one target");
  if (!target_ids.empty() && target_ids.size() != targets.size())
    throw Error("bad_input", "target_ids must match target count");
  MomentumSet set;
  set.source_id = source_id;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    RegResult r;
    try {
      r = register_pair(Ic, targets[j], cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "registration to target " + std::to_string(j) +
                                " failed: " + e.what());
    }
    const EnergyRecord last = r.energy_trace.back();
    set.momenta.push_back(std::move(r.m0));
    set.provenance.push_back(
        {target_ids.empty() ? "target_" + std::to_string(j) : target_ids[j],
         last.regularity, last.similarity});
  }
  set.validate();
  return set;
}

}  // namespace geoflow
