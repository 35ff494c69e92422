#include <cmath>

#include "doctest.h"
#include "geoflow/labels.hpp"
#include "helpers.hpp"

using namespace geoflow;

namespace {

// 8x8 map: label 1 block left, label 2 block right, background elsewhere.
LabelMap blocks_map() {
  LabelMap m(GridSpec::make2d(8, 8), 3);
  for (int y = 2; y < 6; ++y) {
    for (int x = 1; x < 4; ++x) m.at(x, y) = 1;
    for (int x = 5; x < 7; ++x) m.at(x, y) = 2;
  }
  return m;
}

DeformationMap shift_map(const GridSpec& g, double dx, double dy) {
  DeformationMap map = identity_map(g);
  for (std::size_t p = 0; p < g.num_points(); ++p) {
    map.at(p, 0) += dx;
    map.at(p, 1) += dy;
  }
  return map;
}

}  // namespace

TEST_CASE("one_hot and argmax round trip") {
  const LabelMap m = blocks_map();
  const SoftLabelField soft = one_hot(m);
  CHECK(soft.label_count == 3);
  for (std::size_t p = 0; p < m.labels.size(); ++p) {
    double sum = 0.0;
    for (int l = 0; l < 3; ++l) sum += soft.at(p, l);
    CHECK(sum == 1.0);
    CHECK(soft.at(p, m.labels[p]) == 1.0);
  }
  const LabelMap back = argmax_labels(soft);
  CHECK(back.labels == m.labels);
  CHECK(back.label_count == 3);
}

TEST_CASE("argmax ties break toward the smaller label") {
  SoftLabelField soft(GridSpec::make2d(2, 2), 3);
  for (std::size_t p = 0; p < 4; ++p) {
    soft.at(p, 0) = 0.2;
    soft.at(p, 1) = 0.4;
    soft.at(p, 2) = 0.4;
  }
  const LabelMap m = argmax_labels(soft);
  for (std::uint16_t l : m.labels) CHECK(l == 1);
}

TEST_CASE("warping labels by an integer shift moves them exactly") {
  const LabelMap m = blocks_map();
  // Pull-back by +1 in x: output(x) = input(x+1), so blocks move left.
  const LabelMap w = warp_labels(m, shift_map(m.grid, 1.0, 0.0));
  for (int y = 2; y < 6; ++y) {
    for (int x = 0; x < 3; ++x) CHECK(w.at(x, y) == 1);
    for (int x = 4; x < 6; ++x) CHECK(w.at(x, y) == 2);
    CHECK(w.at(3, y) == 0);
  }
}

TEST_CASE("label warping commutes with label permutation") {
  const LabelMap m = blocks_map();
  const DeformationMap map = shift_map(m.grid, 0.4, -0.7);
  const LabelMap w = warp_labels(m, map);

  // Swap labels 1 and 2, warp, swap back.
  LabelMap swapped = m;
  for (std::uint16_t& l : swapped.labels) {
    if (l == 1) {
      l = 2;
    } else if (l == 2) {
      l = 1;
    }
  }
  LabelMap w2 = warp_labels(swapped, map);
  for (std::uint16_t& l : w2.labels) {
    if (l == 1) {
      l = 2;
    } else if (l == 2) {
      l = 1;
    }
  }
  CHECK(w.labels == w2.labels);
}

TEST_CASE("soft warp preserves the probability partition") {
  const LabelMap m = blocks_map();
  const SoftLabelField soft = one_hot(m);
  const SoftLabelField w = warp_soft(soft, shift_map(m.grid, 0.3, 0.6));
  for (std::size_t p = 0; p < m.labels.size(); ++p) {
    double sum = 0.0;
    for (int l = 0; l < 3; ++l) {
      CHECK(w.at(p, l) >= -1e-12);
      sum += w.at(p, l);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fusing one prediction is its argmax") {
  const LabelMap m = blocks_map();
  SoftLabelField soft = one_hot(m);
  soft.at(0, 0) = 0.5;
  soft.at(0, 1) = 0.3;
  soft.at(0, 2) = 0.2;
  const LabelMap fused = label_fusion({soft});
  CHECK(fused.labels == argmax_labels(soft).labels);
}

TEST_CASE("fusing identical predictions changes nothing") {
  const SoftLabelField soft = one_hot(blocks_map());
  const LabelMap once = label_fusion({soft});
  const LabelMap thrice = label_fusion({soft, soft, soft});
  CHECK(once.labels == thrice.labels);
}

TEST_CASE("fusion is invariant to input order") {
  const GridSpec g = GridSpec::make2d(6, 6);
  Rng rng(9);
  std::vector<SoftLabelField> softs;
  for (int k = 0; k < 3; ++k) {
    SoftLabelField s(g, 3);
    for (std::size_t p = 0; p < g.num_points(); ++p) {
      double sum = 0.0;
      for (int l = 0; l < 3; ++l) {
        s.at(p, l) = rng.uniform(0.05, 1.0);
        sum += s.at(p, l);
      }
      for (int l = 0; l < 3; ++l) s.at(p, l) /= sum;
    }
    softs.push_back(s);
  }
  const LabelMap a = label_fusion({softs[0], softs[1], softs[2]});
  const LabelMap b = label_fusion({softs[2], softs[0], softs[1]});
  CHECK(a.labels == b.labels);
}

TEST_CASE("fusion input checks") {
  CHECK_THROWS_AS(label_fusion({}), Error);
  SoftLabelField a(GridSpec::make2d(4, 4), 2);
  SoftLabelField b(GridSpec::make2d(5, 4), 2);
  CHECK_THROWS_AS(label_fusion({a, b}), Error);
}

TEST_CASE("dice arithmetic") {
  const GridSpec g = GridSpec::make2d(4, 4);
  LabelMap a(g, 3);
  LabelMap b(g, 3);
  // Label 1: a has 4 voxels, b has 2, overlap 2 -> dice 2*2/(4+2) = 2/3.
  a.at(0, 0) = a.at(1, 0) = a.at(2, 0) = a.at(3, 0) = 1;
  b.at(0, 0) = b.at(1, 0) = 1;
  // Label 2: disjoint singletons -> dice 0.
  a.at(0, 3) = 2;
  b.at(1, 3) = 2;
  const DiceResult d = dice(a, b);
  REQUIRE(d.per_label.size() == 3);
  CHECK(d.per_label[1] == doctest::Approx(2.0 / 3.0));
  CHECK(d.per_label[2] == doctest::Approx(0.0));
  CHECK(d.mean_foreground == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0));

  // Perfect agreement scores 1 everywhere, absent labels included.
  const DiceResult self = dice(a, a);
  CHECK(self.per_label[1] == doctest::Approx(1.0));
  CHECK(self.per_label[2] == doctest::Approx(1.0));
  CHECK(self.mean_foreground == doctest::Approx(1.0));
}

TEST_CASE("dice grid mismatch is rejected") {
  LabelMap a(GridSpec::make2d(4, 4), 2);
  LabelMap b(GridSpec::make2d(4, 5), 2);
  CHECK_THROWS_AS(dice(a, b), Error);
}

TEST_CASE("label map validation") {
  LabelMap m(GridSpec::make2d(4, 4), 2);
  m.validate();
  m.labels[3] = 7;  // out of range for label_count 2
  CHECK_THROWS_AS(m.validate(), Error);
}
