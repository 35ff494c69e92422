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
#include "geoflow/subspace.hpp"

#include <cmath>
#include <sstream>

namespace geoflow {

void MomentumSet::validate() const {
  if (momenta.empty())
    throw Error("bad_input", "momentum set needs at least one momentum");
  for (const auto& m : momenta) {
    if (!(m.grid == momenta.front().grid) || m.ncomp != m.grid.dim)
      throw Error("grid_mismatch", "momentum set entries must share one grid");
  }
  if (!provenance.empty() && provenance.size() != momenta.size())
    throw Error("bad_input", "provenance must match momentum count");
}

void SamplerConfig::validate() const {
  if (!(t_min <= t_max))
    throw Error("bad_config", "t_range must be a nonempty interval");
  if (K < 1) throw Error("bad_config", "K must be >= 1");
  shoot.validate();
}

VectorField convex_combination(const MomentumSet& set,
                               const std::vector<double>& lambda) {
  set.validate();
  if (lambda.size() != set.momenta.size())
    throw Error("bad_lambda", "weight count must match momentum count");
  double sum = 0.0;
  for (double l : lambda) {
    if (l < 0.0) throw Error("bad_lambda", "weights must be nonnegative");
    sum += l;
  }
  if (!(sum > 0.0)) throw Error("bad_lambda", "weights must not all be zero");
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("bad_lambda", "weights must sum to 1 within 1e-9");
  VectorField out(set.momenta.front().grid, set.momenta.front().ncomp);
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const double w = lambda[j] / sum;
    const auto& m = set.momenta[j];
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += w * m.data[i];
  }
  return out;
}

std::vector<double> sample_lambda(int K, Rng& rng) {
  if (K < 1) throw Error("bad_config", "K must be >= 1");
  std::vector<double> lambda(K);
  double sum = 0.0;
  while (sum <= 0.0) {
    sum = 0.0;
    for (int j = 0; j < K; ++j) {
      lambda[j] = rng.exponential();
      sum += lambda[j];
    }
  }
  for (double& l : lambda) l /= sum;
  return lambda;
}

double sample_t(const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  return rng.uniform(cfg.t_min, cfg.t_max);
}

SubspaceSample draw_sample(const MomentumSet& set, const SamplerConfig& cfg,
                           std::uint64_t seed) {
  cfg.validate();
  set.validate();
  if (static_cast<std::size_t>(cfg.K) != set.momenta.size())
    throw Error("bad_config", "sampler K must match momentum set size");
  Rng rng(seed);
  SubspaceSample s;
  s.seed = seed;
  s.lambda = sample_lambda(cfg.K, rng);
  s.t = sample_t(cfg, rng);
  s.m_tilde = convex_combination(set, s.lambda);
  try {
    GeodesicState state = shoot(s.m_tilde, s.t, cfg.shoot);
    s.phi_inv = std::move(state.phi_inv);
    s.phi = std::move(state.phi);
  } catch (const Error& e) {
    if (e.code() != "blow_up") throw;
    std::ostringstream msg;
    msg << e.what() << " (lambda=[";
    for (std::size_t j = 0; j < s.lambda.size(); ++j)
      msg << (j ? ", " : "") << s.lambda[j];
    msg << "], t=" << s.t << ", seed=" << seed << ")";
    throw Error("blow_up", msg.str());
  }
  return s;
}

}  // namespace geoflow
