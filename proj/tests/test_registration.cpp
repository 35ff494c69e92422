#include <cmath>

#include "doctest.h"
#include "geoflow/registration.hpp"
#include "geoflow/shooting.hpp"
#include "geoflow/synthdata.hpp"
#include "helpers.hpp"

using namespace geoflow;

namespace {

RegConfig tiny_cfg(Similarity sim = Similarity::SSD) {
  RegConfig cfg;
  cfg.similarity = sim;
  cfg.sim_weight = 10.0;
  cfg.lncc_window = 5;
  cfg.shoot.steps_per_unit_time = 5;
  cfg.shoot.kernel = KernelSpec::multi({1.5, 3.0}, {0.5, 0.5});
  cfg.multiscale = {1};
  cfg.level_iters = {20};
  cfg.optimizer.max_iters = 20;
  return cfg;
}

struct FdProblem {
  ScalarField I0;
  ScalarField I1;
  VectorField m0;
  VectorField dir;
};

FdProblem fd_problem(const GridSpec& g, std::uint64_t seed) {
  FdProblem p;
  p.I0 = geoflow_tests::smooth_noise_scalar(g, seed * 3 + 1, 2.0, 1.0);
  p.I1 = geoflow_tests::smooth_noise_scalar(g, seed * 3 + 2, 2.0, 1.0);
  p.m0 = geoflow_tests::smooth_noise_momentum(g, seed * 3 + 3, 2.0, 0.4);
  p.dir = geoflow_tests::smooth_noise_momentum(g, seed * 3 + 101, 2.0, 1.0);
  return p;
}

/// Relative error of the adjoint directional derivative against central
/// finite differences, minimized over a small h sweep.
double fd_relative_error(const FdProblem& p, const RegConfig& cfg) {
  const VectorField g = energy_gradient(p.m0, p.I0, p.I1, cfg);
  const double pred = inner_product(g, p.dir);
  double best = 1e300;
  for (double h : {1e-3, 1e-4, 1e-5}) {
    VectorField plus = p.m0;
    VectorField minus = p.m0;
    for (std::size_t i = 0; i < plus.data.size(); ++i) {
      plus.data[i] += h * p.dir.data[i];
      minus.data[i] -= h * p.dir.data[i];
    }
    const double ep = energy(plus, p.I0, p.I1, cfg).total;
    const double em = energy(minus, p.I0, p.I1, cfg).total;
    const double fd = (ep - em) / (2.0 * h);
    const double denom = std::max(std::abs(fd), std::abs(pred));
    if (denom == 0.0) continue;
    best = std::min(best, std::abs(fd - pred) / denom);
  }
  return best;
}

std::pair<ScalarField, ScalarField> shifted_pair(int n, double dx, double dy) {
  ShapeSceneSpec spec = default_scene(2, n);
  const auto base = generate_scene(spec);
  ShapeSceneSpec moved = spec;
  for (Shape& s : moved.shapes) {
    s.center[0] += dx;
    s.center[1] += dy;
  }
  const auto tgt = generate_scene(moved);
  return {base.first, tgt.first};
}

double ssd(const ScalarField& a, const ScalarField& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double r = a.values[i] - b.values[i];
    acc += r * r;
  }
  return acc;
}

}  // namespace

TEST_CASE("energy at zero momentum is the plain dissimilarity") {
  const GridSpec g = GridSpec::make2d(12, 12, 0.5, 0.5);
  const ScalarField I0 = geoflow_tests::smooth_noise_scalar(g, 1, 1.5, 1.0);
  const ScalarField I1 = geoflow_tests::smooth_noise_scalar(g, 2, 1.5, 1.0);
  const RegConfig cfg = tiny_cfg();
  const VectorField zero(g);
  const EnergyBreakdown e = energy(zero, I0, I1, cfg);
  CHECK(e.regularity == doctest::Approx(0.0));
  CHECK(e.similarity ==
        doctest::Approx(cfg.sim_weight * g.voxel_volume() * ssd(I0, I1))
            .epsilon(1e-10));
  CHECK(e.total == doctest::Approx(e.regularity + e.similarity));
}

TEST_CASE("regularity energy is the half pairing") {
  const GridSpec g = GridSpec::make2d(12, 12);
  const RegConfig cfg = tiny_cfg();
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 5, 2.0, 0.5);
  const EnergyBreakdown e = energy(m0, ScalarField(g), ScalarField(g), cfg);
  CHECK(e.regularity ==
        doctest::Approx(0.5 * inner_product(m0, smooth(m0, cfg.shoot.kernel)))
            .epsilon(1e-12));
  CHECK(e.similarity == doctest::Approx(0.0));
}

TEST_CASE("adjoint gradient matches finite differences: ssd, unit grid") {
  const GridSpec g = GridSpec::make2d(12, 12);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CHECK(fd_relative_error(fd_problem(g, seed), tiny_cfg()) < 1e-5);
  }
}

TEST_CASE("adjoint gradient matches finite differences: ssd, scaled grid") {
  // Non-unit spacing pins the pairing convention.
  const GridSpec g = GridSpec::make2d(12, 10, 0.7, 1.3);
  for (std::uint64_t seed = 4; seed <= 5; ++seed) {
    CHECK(fd_relative_error(fd_problem(g, seed), tiny_cfg()) < 1e-5);
  }
}

TEST_CASE("adjoint gradient matches finite differences: lncc") {
  const GridSpec g = GridSpec::make2d(12, 12);
  for (std::uint64_t seed = 6; seed <= 7; ++seed) {
    CHECK(fd_relative_error(fd_problem(g, seed), tiny_cfg(Similarity::LNCC)) <
          1e-4);
  }
}

TEST_CASE("adjoint gradient matches finite differences: multiple time steps") {
  const GridSpec g = GridSpec::make2d(12, 12);
  RegConfig cfg = tiny_cfg();
  cfg.shoot.steps_per_unit_time = 13;
  CHECK(fd_relative_error(fd_problem(g, 8), cfg) < 1e-5);
}

TEST_CASE("gradient of pure regularity is the smoothed momentum") {
  // With identical images and zero momentum the similarity seed vanishes,
  // leaving exactly smooth(m0) = 0; with m0 != 0 compare against a run
  // whose similarity part is switched off by matching warped source.
  const GridSpec g = GridSpec::make2d(12, 12);
  const RegConfig cfg = tiny_cfg();
  const ScalarField I(g, 0.5);  // constant image: warp changes nothing
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 9, 2.0, 0.3);
  const VectorField grad = energy_gradient(m0, I, I, cfg);
  const VectorField want = smooth(m0, cfg.shoot.kernel);
  CHECK(geoflow_tests::max_abs_diff(grad.data, want.data) < 1e-9);
}

TEST_CASE("box_sum matches a brute-force reference") {
  const GridSpec g = GridSpec::make2d(9, 7);
  ScalarField f(g);
  Rng rng(31);
  for (double& v : f.values) v = rng.normal();
  const int r = 2;
  const ScalarField got = detail::box_sum(f, r);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 9; ++x) {
      double want = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || xx >= 9 || yy < 0 || yy >= 7) continue;
          want += f.at(xx, yy);
        }
      }
      CHECK(got.at(x, y) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("downsample block averages and grid placement") {
  const GridSpec g = GridSpec::make2d(8, 6, 1.0, 1.0, 10.0, 20.0);
  ScalarField f(g);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) f.at(x, y) = x;
  }
  const ScalarField c = detail::downsample(f, 2);
  CHECK(c.grid.dims[0] == 4);
  CHECK(c.grid.dims[1] == 3);
  CHECK(c.grid.spacing[0] == doctest::Approx(2.0));
  CHECK(c.grid.origin[0] == doctest::Approx(10.5));
  CHECK(c.grid.origin[1] == doctest::Approx(20.5));
  CHECK(c.at(0, 0) == doctest::Approx(0.5));
  CHECK(c.at(1, 0) == doctest::Approx(2.5));

  // Constants survive any factor, partial blocks included.
  ScalarField ones(GridSpec::make2d(7, 7), 1.0);
  const ScalarField c3 = detail::downsample(ones, 3);
  CHECK(c3.grid.dims[0] == 3);
  for (double v : c3.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("upsample_momentum on the same grid is exact") {
  const GridSpec g = GridSpec::make2d(10, 10);
  const VectorField m = geoflow_tests::smooth_noise_momentum(g, 12, 2.0, 1.0);
  const VectorField up = detail::upsample_momentum(m, g);
  CHECK(geoflow_tests::max_abs_diff(up.data, m.data) < 1e-12);
}

TEST_CASE("registration recovers a small translation") {
  const auto [I0, I1] = shifted_pair(32, 1.5, -1.0);
  RegConfig cfg = tiny_cfg();
  // The default weight optimizes to a looser match; quality fixtures pin
  // a stiffer trade-off, recorded in the config like any other choice.
  cfg.sim_weight = 200.0;
  cfg.shoot.kernel = KernelSpec::default_for(I0.grid);
  cfg.shoot.steps_per_unit_time = 10;
  cfg.multiscale = {2, 1};
  cfg.level_iters = {20, 15};
  const RegResult res = register_pair(I0, I1, cfg);

  const double before = ssd(I0, I1);
  const double after = ssd(res.final_warped, I1);
  CHECK(after < 0.2 * before);
  CHECK(min_value(jacobian_determinant(
            shoot(res.m0, 1.0, cfg.shoot).phi_inv)) > 0.0);

  // Energy is non-increasing across accepted iterates within each level.
  for (std::size_t i = 1; i < res.energy_trace.size(); ++i) {
    if (res.energy_trace[i].level == res.energy_trace[i - 1].level) {
      CHECK(res.energy_trace[i].total() <=
            res.energy_trace[i - 1].total() + 1e-9);
    }
  }
}

TEST_CASE("identical images keep the momentum at zero") {
  const auto [I0, I1] = shifted_pair(32, 0.0, 0.0);
  RegConfig cfg = tiny_cfg();
  cfg.shoot.kernel = KernelSpec::default_for(I0.grid);
  cfg.multiscale = {1};
  cfg.level_iters = {10};
  const RegResult res = register_pair(I0, I0, cfg);
  double peak = 0.0;
  for (double v : res.m0.data) peak = std::max(peak, std::abs(v));
  CHECK(peak < 1e-12);
  (void)I1;
}

TEST_CASE("lncc is invariant to affine intensity changes and descends") {
  auto [I0, I1] = shifted_pair(32, 1.5, 0.5);
  RegConfig cfg = tiny_cfg(Similarity::LNCC);
  cfg.sim_weight = 1.0;
  cfg.shoot.kernel = KernelSpec::default_for(I0.grid);
  cfg.shoot.steps_per_unit_time = 10;

  // The functional itself ignores affine rescaling of either image.
  const VectorField m0 =
      geoflow_tests::smooth_noise_momentum(I0.grid, 9, 3.0, 0.5);
  ScalarField I1s = I1;
  for (double& v : I1s.values) v = 0.6 * v + 0.2;
  ScalarField I0s = I0;
  for (double& v : I0s.values) v = 1.7 * v - 0.3;
  // Invariance is exact only with an unguarded correlation; windows near
  // the variance guard's scale shift slightly under rescaling, so both
  // sides are held to one percent.
  const double base = energy(m0, I0, I1, cfg).similarity;
  CHECK(energy(m0, I0, I1s, cfg).similarity ==
        doctest::Approx(base).epsilon(1e-2));
  CHECK(energy(m0, I0s, I1, cfg).similarity ==
        doctest::Approx(base).epsilon(1e-2));

  // Optimization still makes headway on the rescaled pair. Progress is
  // slow on piecewise-flat scenes (only edge windows carry a gradient),
  // so only steady descent at the finest level is required.
  cfg.multiscale = {2, 1};
  cfg.level_iters = {15, 10};
  const RegResult res = register_pair(I0, I1s, cfg);
  REQUIRE(!res.energy_trace.empty());
  const int finest = static_cast<int>(cfg.multiscale.size()) - 1;
  double first = -1.0, last = -1.0;
  for (const EnergyRecord& r : res.energy_trace) {
    if (r.level != finest) continue;
    if (first < 0.0) first = r.similarity;
    last = r.similarity;
  }
  REQUIRE(first > 0.0);
  CHECK(last < 0.99 * first);
}

TEST_CASE("build_momentum_set covers all targets with provenance") {
  const auto [I0, I1] = shifted_pair(32, 1.0, 0.0);
  const auto [unused, I2] = shifted_pair(32, -1.0, 0.5);
  RegConfig cfg = tiny_cfg();
  cfg.shoot.kernel = KernelSpec::default_for(I0.grid);
  cfg.multiscale = {2, 1};
  cfg.level_iters = {10, 5};
  const MomentumSet set =
      build_momentum_set(I0, {I1, I2}, cfg, "atlas", {"a", "b"});
  set.validate();
  CHECK(set.source_id == "atlas");
  REQUIRE(set.momenta.size() == 2);
  REQUIRE(set.provenance.size() == 2);
  CHECK(set.provenance[0].target_id == "a");
  CHECK(set.provenance[1].target_id == "b");
  CHECK(set.provenance[0].similarity >= 0.0);
  (void)unused;
}

TEST_CASE("registration config validation") {
  RegConfig cfg = tiny_cfg();
  cfg.multiscale = {1, 2};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_cfg();
  cfg.multiscale = {4, 2};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_cfg();
  cfg.level_iters = {5};
  cfg.multiscale = {2, 1};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_cfg(Similarity::LNCC);
  cfg.lncc_window = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_cfg();
  cfg.optimizer.shrink = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
