#include <cmath>

#include "doctest.h"
#include "geoflow/kernel.hpp"
#include "geoflow/shooting.hpp"
#include "helpers.hpp"

using namespace geoflow;

namespace {

ShootConfig small_cfg(int spu = 20) {
  ShootConfig cfg;
  cfg.steps_per_unit_time = spu;
  cfg.kernel = KernelSpec::multi({1.5, 3.0}, {0.5, 0.5});
  return cfg;
}

double map_max_diff(const DeformationMap& a, const DeformationMap& b) {
  return geoflow_tests::max_abs_diff(a.coords, b.coords);
}

}  // namespace

TEST_CASE("step counts") {
  CHECK(detail::step_count(1.0, 20) == 20);
  CHECK(detail::step_count(0.15, 20) == 3);
  CHECK(detail::step_count(0.0, 20) == 1);
  CHECK(detail::step_count(-0.3, 10) == 3);
  CHECK(detail::step_count(2.0, 10) == 20);
  CHECK(detail::step_count(0.001, 10) == 1);
}

TEST_CASE("epdiff rhs vanishes for constant fields") {
  const GridSpec g = GridSpec::make2d(10, 10);
  VectorField m(g);
  VectorField v(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    m.at(p, 0) = 0.7;
    m.at(p, 1) = -0.3;
    v.at(p, 0) = 1.1;
    v.at(p, 1) = 0.4;
  }
  const VectorField rhs = epdiff_rhs(m, v);
  for (double x : rhs.data) CHECK(x == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("epdiff rhs matches the analytic value for linear fields") {
  // m_i = sum_j A[i][j] x_j, v_i = sum_j B[i][j] x_j. Then
  // rhs_i = -(tr(B) m_i + sum_j B[j][i] m_j + sum_j A[i][j] v_j).
  const double A[2][2] = {{0.3, -0.7}, {0.2, 0.5}};
  const double B[2][2] = {{-0.4, 0.6}, {0.1, 0.8}};
  const GridSpec g = GridSpec::make2d(12, 12, 0.5, 0.8);
  const DeformationMap id = identity_map(g);
  VectorField m(g);
  VectorField v(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    for (int i = 0; i < 2; ++i) {
      m.at(p, i) = A[i][0] * id.at(p, 0) + A[i][1] * id.at(p, 1);
      v.at(p, i) = B[i][0] * id.at(p, 0) + B[i][1] * id.at(p, 1);
    }
  }
  const VectorField rhs = epdiff_rhs(m, v);
  const double trB = B[0][0] + B[1][1];
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    for (int i = 0; i < 2; ++i) {
      double want = trB * m.at(p, i);
      for (int j = 0; j < 2; ++j) {
        want += B[j][i] * m.at(p, j) + A[i][j] * v.at(p, j);
      }
      CHECK(rhs.at(p, i) == doctest::Approx(-want).epsilon(1e-10));
    }
  }
}

TEST_CASE("shoot to t=0 returns the identity bit-exactly on unit grids") {
  const GridSpec g = GridSpec::make2d(16, 16);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 9, 2.0, 0.5);
  const GeodesicState st = shoot(m0, 0.0, small_cfg());
  CHECK(st.t == 0.0);
  CHECK(geoflow_tests::bitwise_equal(st.m.data, m0.data));
  const DeformationMap id = identity_map(g);
  CHECK(geoflow_tests::bitwise_equal(st.phi_inv.coords, id.coords));
  CHECK(geoflow_tests::bitwise_equal(st.phi.coords, id.coords));
}

TEST_CASE("momentum-velocity pairing is conserved along the geodesic") {
  // The conservation defect is spatial truncation, so it is measured at
  // the working resolution with the grid-matched kernel; refining the
  // step count alone does not move it.
  const GridSpec g = GridSpec::make2d(64, 64);
  ShootConfig cfg = small_cfg(20);
  cfg.kernel = KernelSpec::default_for(g);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 21, 5.0, 0.3);
  const double h0 = inner_product(m0, smooth(m0, cfg.kernel));
  REQUIRE(h0 > 0.0);
  const std::vector<double> ts = {0.25, 0.5, 0.75, 1.0};
  const std::vector<GeodesicState> states = shoot_sequence(m0, ts, cfg);
  for (const GeodesicState& st : states) {
    const double h = inner_product(st.m, st.v);
    CHECK(std::abs(h - h0) / h0 < 0.01);
  }
}

TEST_CASE("geodesic maps self-converge under step refinement") {
  const GridSpec g = GridSpec::make2d(32, 32);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 33, 3.0, 1.0);
  const GeodesicState coarse = shoot(m0, 1.0, small_cfg(20));
  const GeodesicState fine = shoot(m0, 1.0, small_cfg(160));
  CHECK(map_max_diff(coarse.phi_inv, fine.phi_inv) < 0.01);
  CHECK(map_max_diff(coarse.phi, fine.phi) < 0.01);
}

TEST_CASE("time reversal: negated momentum shot backwards matches exactly") {
  const GridSpec g = GridSpec::make2d(24, 24);
  const ShootConfig cfg = small_cfg(20);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 4, 2.5, 0.7);
  VectorField neg = m0;
  for (double& x : neg.data) x = -x;
  const GeodesicState fwd = shoot(m0, 1.0, cfg);
  const GeodesicState bwd = shoot(neg, -1.0, cfg);
  CHECK(geoflow_tests::bitwise_equal(fwd.phi_inv.coords, bwd.phi_inv.coords));
  CHECK(geoflow_tests::bitwise_equal(fwd.phi.coords, bwd.phi.coords));
  for (std::size_t i = 0; i < fwd.m.data.size(); ++i) {
    CHECK(fwd.m.data[i] == -bwd.m.data[i]);
  }
}

TEST_CASE("forward and inverse maps compose to the identity") {
  const GridSpec g = GridSpec::make2d(32, 32);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 13, 3.0, 1.2);
  const GeodesicState st = shoot(m0, 1.0, small_cfg(20));
  const DeformationMap round = compose_maps(st.phi, st.phi_inv);
  const DeformationMap id = identity_map(g);
  // Interior only: boundary clamping distorts the composition there.
  double worst = 0.0;
  for (int y = 4; y < 28; ++y) {
    for (int x = 4; x < 28; ++x) {
      const std::size_t p = g.index(x, y, 0);
      for (int c = 0; c < 2; ++c) {
        worst = std::max(worst, std::abs(round.at(p, c) - id.at(p, c)));
      }
    }
  }
  CHECK(worst < 0.5);
}

TEST_CASE("shoot_sequence matches independent shoots") {
  const GridSpec g = GridSpec::make2d(24, 24);
  const ShootConfig cfg = small_cfg(20);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 17, 2.5, 0.8);

  const std::vector<double> ts = {-0.5, 0.3, 1.0};
  const std::vector<GeodesicState> seq = shoot_sequence(m0, ts, cfg);
  REQUIRE(seq.size() == 3);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(seq[i].t == ts[i]);
    const GeodesicState solo = shoot(m0, ts[i], cfg);
    CHECK(geoflow_tests::max_abs_diff(seq[i].m.data, solo.m.data) < 1e-12);
    CHECK(map_max_diff(seq[i].phi_inv, solo.phi_inv) < 1e-12);
    CHECK(map_max_diff(seq[i].phi, solo.phi) < 1e-12);
  }

  // On exact unit boundaries the sweep is bit-identical to shoot().
  const std::vector<GeodesicState> unit = shoot_sequence(m0, {1.0}, cfg);
  const GeodesicState solo = shoot(m0, 1.0, cfg);
  CHECK(geoflow_tests::bitwise_equal(unit[0].m.data, solo.m.data));
  CHECK(geoflow_tests::bitwise_equal(unit[0].phi_inv.coords,
                                     solo.phi_inv.coords));
  CHECK(geoflow_tests::bitwise_equal(unit[0].phi.coords, solo.phi.coords));
}

TEST_CASE("off-boundary times interleave with boundary times") {
  const GridSpec g = GridSpec::make2d(16, 16);
  const ShootConfig cfg = small_cfg(10);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 2, 2.0, 0.6);
  const std::vector<double> ts = {0.07, 0.1, 0.93, 2.0};
  const std::vector<GeodesicState> seq = shoot_sequence(m0, ts, cfg);
  REQUIRE(seq.size() == 4);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const GeodesicState solo = shoot(m0, ts[i], cfg);
    CHECK(map_max_diff(seq[i].phi_inv, solo.phi_inv) < 5e-4);
  }
}

TEST_CASE("extrapolation continues the flow rather than scaling it") {
  const GridSpec g = GridSpec::make2d(32, 32);
  const ShootConfig cfg = small_cfg(20);
  const VectorField m0 = geoflow_tests::smooth_noise_momentum(g, 55, 3.5, 1.0);
  const GeodesicState s1 = shoot(m0, 1.0, cfg);
  const GeodesicState s2 = shoot(m0, 2.0, cfg);
  const DeformationMap id = identity_map(g);

  // The doubled-time inverse map differs from linear displacement scaling
  // somewhere (the flow transports, the affine surrogate does not).
  double worst = 0.0;
  for (std::size_t i = 0; i < id.coords.size(); ++i) {
    const double affine = id.coords[i] + 2.0 * (s1.phi_inv.coords[i] -
                                                id.coords[i]);
    worst = std::max(worst, std::abs(affine - s2.phi_inv.coords[i]));
  }
  CHECK(worst > 0.05);

  // Both stay diffeomorphic here.
  CHECK(min_value(jacobian_determinant(s2.phi_inv)) > 0.0);
  CHECK(min_value(jacobian_determinant(shoot(m0, -1.0, cfg).phi_inv)) > 0.0);
}

TEST_CASE("exploding momentum reports blow_up") {
  const GridSpec g = GridSpec::make2d(16, 16);
  // Constant momentum is a fixed point of the flow, so the field must
  // vary in space for products of derivatives to overflow.
  const VectorField m0 =
      geoflow_tests::smooth_noise_momentum(g, 77, 2.0, 1e160);
  try {
    shoot(m0, 1.0, small_cfg(5));
    FAIL("expected blow_up");
  } catch (const Error& e) {
    CHECK(std::string(e.code()) == "blow_up");
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  ShootConfig cfg;
  cfg.steps_per_unit_time = 0;
  cfg.kernel = KernelSpec::single(1.0);
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.steps_per_unit_time = 4;
  cfg.validate();
}
