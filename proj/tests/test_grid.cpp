#include <cmath>

#include "doctest.h"
#include "geoflow/grid.hpp"
#include "geoflow/rng.hpp"
#include "helpers.hpp"

using namespace geoflow;

namespace {

// Affine scalar c0 + c.x and its exact samples on the grid.
ScalarField affine_scalar(const GridSpec& g, double c0, double cx, double cy,
                          double cz) {
  ScalarField f(g);
  const int nz = g.dim == 3 ? g.dims[2] : 1;
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int x = 0; x < g.dims[0]; ++x) {
        const double px = g.origin[0] + x * g.spacing[0];
        const double py = g.origin[1] + y * g.spacing[1];
        const double pz = g.dim == 3 ? g.origin[2] + z * g.spacing[2] : 0.0;
        f.at(x, y, z) = c0 + cx * px + cy * py + cz * pz;
      }
    }
  }
  return f;
}

}  // namespace

TEST_CASE("grid validation and measures") {
  GridSpec g = GridSpec::make2d(8, 6, 0.5, 2.0, -1.0, 3.0);
  g.validate();
  CHECK(g.num_points() == 48);
  CHECK(g.voxel_volume() == doctest::Approx(1.0));
  CHECK(g.extent(0) == doctest::Approx(3.5));
  CHECK(g.extent(1) == doctest::Approx(10.0));
  CHECK(g.max_extent() == doctest::Approx(10.0));

  GridSpec bad = g;
  bad.dims[0] = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = g;
  bad.spacing[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = g;
  bad.dim = 4;
  CHECK_THROWS_AS(bad.validate(), Error);

  GridSpec g3 = GridSpec::make3d(4, 5, 6, 1.0, 1.0, 2.0);
  CHECK(g3.num_points() == 120);
  CHECK(g3.voxel_volume() == doctest::Approx(2.0));
}

TEST_CASE("identity map holds exact node coordinates") {
  const GridSpec g = GridSpec::make2d(5, 4, 0.7, 1.3, 2.0, -1.0);
  const DeformationMap id = identity_map(g);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      const std::size_t p = g.index(x, y, 0);
      CHECK(id.at(p, 0) == g.origin[0] + x * g.spacing[0]);
      CHECK(id.at(p, 1) == g.origin[1] + y * g.spacing[1]);
    }
  }
}

TEST_CASE("interpolation at nodes is exact on a unit grid") {
  const GridSpec g = GridSpec::make2d(16, 16);
  const ScalarField f = geoflow_tests::smooth_noise_scalar(g, 7, 2.0, 1.0);
  const ScalarField back = interpolate(f, identity_map(g));
  CHECK(geoflow_tests::bitwise_equal(back.values, f.values));
}

TEST_CASE("interpolation reproduces affine functions between nodes") {
  const GridSpec g = GridSpec::make2d(9, 9, 0.8, 1.1, -2.0, 0.5);
  const ScalarField f = affine_scalar(g, 0.3, 1.7, -0.9, 0.0);
  DeformationMap pts(g);
  Rng rng(11);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    pts.at(p, 0) = g.origin[0] + rng.uniform(0.0, g.extent(0));
    pts.at(p, 1) = g.origin[1] + rng.uniform(0.0, g.extent(1));
  }
  const ScalarField vals = interpolate(f, pts);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    const double want = 0.3 + 1.7 * pts.at(p, 0) - 0.9 * pts.at(p, 1);
    CHECK(vals.values[p] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("out-of-domain queries clamp to the boundary") {
  const GridSpec g = GridSpec::make2d(6, 6);
  ScalarField f(g);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) f.at(x, y) = 10.0 * y + x;
  }
  DeformationMap pts(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    pts.at(p, 0) = -3.0;  // left of the domain
    pts.at(p, 1) = 2.0;
  }
  const ScalarField vals = interpolate(f, pts);
  CHECK(vals.values[0] == doctest::Approx(20.0));

  // Non-finite query coordinates clamp instead of crashing.
  pts.at(0, 0) = std::nan("");
  const ScalarField v2 = interpolate(f, pts);
  CHECK(std::isfinite(v2.values[0]));
}

TEST_CASE("gradient and divergence are exact for affine fields") {
  const GridSpec g = GridSpec::make2d(10, 8, 0.5, 0.25);
  const ScalarField f = affine_scalar(g, 1.0, 2.5, -4.0, 0.0);
  const VectorField grad = gradient(f);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    CHECK(grad.at(p, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(grad.at(p, 1) == doctest::Approx(-4.0).epsilon(1e-12));
  }

  VectorField v(g);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      const std::size_t p = g.index(x, y, 0);
      const double px = g.origin[0] + x * g.spacing[0];
      const double py = g.origin[1] + y * g.spacing[1];
      v.at(p, 0) = 3.0 * px + 1.0 * py;
      v.at(p, 1) = -2.0 * px + 5.0 * py;
    }
  }
  const ScalarField div = divergence(v);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    CHECK(div.values[p] == doctest::Approx(8.0).epsilon(1e-12));
  }
}

TEST_CASE("jacobian determinant of affine maps") {
  const GridSpec g = GridSpec::make2d(12, 12, 0.75, 1.25);
  CHECK(min_value(jacobian_determinant(identity_map(g))) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_value(jacobian_determinant(identity_map(g))) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // x' = 1.2 x + 0.3 y, y' = -0.1 x + 0.8 y: det 0.99.
  DeformationMap m(g);
  const DeformationMap id = identity_map(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    const double x = id.at(p, 0);
    const double y = id.at(p, 1);
    m.at(p, 0) = 1.2 * x + 0.3 * y;
    m.at(p, 1) = -0.1 * x + 0.8 * y;
  }
  const ScalarField det = jacobian_determinant(m);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    CHECK(det.values[p] == doctest::Approx(0.99).epsilon(1e-10));
  }
}

TEST_CASE("map composition matches analytic composition for affine maps") {
  const GridSpec g = GridSpec::make2d(10, 10, 1.0, 1.0, -4.0, -4.0);
  const DeformationMap id = identity_map(g);
  DeformationMap a(g);
  DeformationMap b(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    const double x = id.at(p, 0);
    const double y = id.at(p, 1);
    a.at(p, 0) = 0.9 * x + 0.1;
    a.at(p, 1) = 0.9 * y - 0.2;
    b.at(p, 0) = x + 0.5;
    b.at(p, 1) = y + 0.25;
  }
  // outer(inner(x)): evaluate a at the points of b.
  const DeformationMap c = compose_maps(a, b);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    const double x = id.at(p, 0);
    const double y = id.at(p, 1);
    const double want_x = 0.9 * (x + 0.5) + 0.1;
    const double want_y = 0.9 * (y + 0.25) - 0.2;
    // The composed points can leave the domain near the border; restrict
    // to the interior where a's samples stay exact.
    if (x + 0.5 <= g.origin[0] + g.extent(0) &&
        y + 0.25 <= g.origin[1] + g.extent(1)) {
      CHECK(c.at(p, 0) == doctest::Approx(want_x).epsilon(1e-10));
      CHECK(c.at(p, 1) == doctest::Approx(want_y).epsilon(1e-10));
    }
  }
}

TEST_CASE("vector interpolation reproduces affine components") {
  const GridSpec g = GridSpec::make2d(8, 8, 1.5, 0.5);
  const DeformationMap id = identity_map(g);
  VectorField v(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    v.at(p, 0) = 2.0 * id.at(p, 0) - id.at(p, 1);
    v.at(p, 1) = 0.5 * id.at(p, 1) + 1.0;
  }
  DeformationMap pts(g);
  Rng rng(3);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    pts.at(p, 0) = g.origin[0] + rng.uniform(0.0, g.extent(0));
    pts.at(p, 1) = g.origin[1] + rng.uniform(0.0, g.extent(1));
  }
  const VectorField out = interpolate(v, pts);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    CHECK(out.at(p, 0) == doctest::Approx(2.0 * pts.at(p, 0) - pts.at(p, 1))
                              .epsilon(1e-10));
    CHECK(out.at(p, 1) ==
          doctest::Approx(0.5 * pts.at(p, 1) + 1.0).epsilon(1e-10));
  }
}

TEST_CASE("deterministic rng streams") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());

  Rng c(42);
  Rng d(43);
  int differences = 0;
  for (int i = 0; i < 16; ++i) {
    if (c.raw() != d.raw()) ++differences;
  }
  CHECK(differences > 12);

  CHECK(Rng::derive(9, 0) != Rng::derive(9, 1));
  CHECK(Rng::derive(9, 0) != Rng::derive(10, 0));
  CHECK(Rng::derive(9, 5) == Rng::derive(9, 5));

  Rng u(7);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform01();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    mean += x;
  }
  mean /= 100000.0;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));

  Rng n(8);
  double nmean = 0.0;
  double nvar = 0.0;
  const int nn = 100000;
  for (int i = 0; i < nn; ++i) {
    const double x = n.normal();
    nmean += x;
    nvar += x * x;
  }
  nmean /= nn;
  nvar = nvar / nn - nmean * nmean;
  CHECK(nmean == doctest::Approx(0.0).epsilon(0.02));
  CHECK(std::abs(nmean) < 0.02);
  CHECK(nvar == doctest::Approx(1.0).epsilon(0.03));
}
