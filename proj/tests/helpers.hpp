#ifndef GEOFLOW_TESTS_HELPERS_HPP
#define GEOFLOW_TESTS_HELPERS_HPP

#include <cmath>
#include <cstring>
#include <vector>

#include "geoflow/grid.hpp"
#include "geoflow/kernel.hpp"
#include "geoflow/rng.hpp"

namespace geoflow_tests {

/// Smooth random scalar field in [0, 1]-ish range: white noise pushed
/// through the multi-Gaussian kernel, then shifted positive.
inline geoflow::ScalarField smooth_noise_scalar(const geoflow::GridSpec& grid,
                                                std::uint64_t seed,
                                                double sigma_mm,
                                                double amplitude) {
  geoflow::Rng rng(seed);
  geoflow::VectorField raw;
  raw.grid = grid;
  raw.ncomp = 1;
  raw.data.resize(grid.num_points());
  for (double& v : raw.data) v = rng.normal();
  const geoflow::VectorField s =
      geoflow::smooth(raw, geoflow::KernelSpec::single(sigma_mm));
  double lo = s.data[0];
  double hi = s.data[0];
  for (double v : s.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  geoflow::ScalarField out;
  out.grid = grid;
  out.values.resize(grid.num_points());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = amplitude * (s.data[i] - lo) / span;
  }
  return out;
}

/// Smooth random momentum with roughly unit-scale components.
inline geoflow::VectorField smooth_noise_momentum(const geoflow::GridSpec& grid,
                                                  std::uint64_t seed,
                                                  double sigma_mm,
                                                  double amplitude) {
  geoflow::Rng rng(seed);
  geoflow::VectorField raw;
  raw.grid = grid;
  raw.ncomp = grid.dim;
  raw.data.resize(grid.num_points() * static_cast<std::size_t>(grid.dim));
  for (double& v : raw.data) v = rng.normal();
  geoflow::VectorField s =
      geoflow::smooth(raw, geoflow::KernelSpec::single(sigma_mm));
  double peak = 0.0;
  for (double v : s.data) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : s.data) v *= amplitude / peak;
  }
  return s;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  if (a.size() != b.size()) return 1e300;
  return m;
}

inline bool bitwise_equal(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace geoflow_tests

#endif
